//! Kinetic inductance from measured resonance frequencies, sheet-inductance
//! regression across strip lengths, and strip characteristic impedance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::stats::fit_line;

/// Kinetic inductance fraction `α = 1 − L_g·C_s·ω_r²`.
pub fn alpha_from_fr(f_r: f64, l_g: f64, c_s: f64) -> Result<f64> {
    for (name, v) in [("f_r", f_r), ("l_g", l_g), ("c_s", c_s)] {
        if !(v.is_finite() && v >= 0.0) || (name != "l_g" && v == 0.0) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    let w = 2.0 * PI * f_r;
    let alpha = 1.0 - l_g * c_s * w * w;
    if alpha <= 0.0 {
        return Err(Error::Unphysical(format!(
            "alpha = {alpha:.4}: the geometric resonance lies below f_r"
        )));
    }
    Ok(alpha)
}

/// Total kinetic inductance `L_k = α·L_g/(1 − α)`.
pub fn lk_from_alpha(alpha: f64, l_g: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", "must lie in [0, 1); alpha = 1 means infinite L_k"));
    }
    if !(l_g >= 0.0) {
        return Err(Error::invalid("l_g", "must be non-negative"));
    }
    Ok(alpha * l_g / (1.0 - alpha))
}

/// `L_k = L_sq·N_sq + intercept` fitted across strips of one film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetFit {
    /// H/sq.
    pub l_sq: f64,
    /// Lead and pad inductance, H.
    pub intercept: f64,
    /// `[[var(l_sq), cov], [cov, var(intercept)]]`.
    pub covariance: [[f64; 2]; 2],
}

impl SheetFit {
    pub fn l_sq_sigma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }
}

/// A measured strip: number of squares and its kinetic inductance, with an
/// optional one-sigma uncertainty on `l_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripPoint {
    pub n_sq: f64,
    pub l_k: f64,
    pub sigma: Option<f64>,
}

pub fn sheet_inductance_fit(points: &[StripPoint]) -> Result<SheetFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two strips".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.n_sq).collect();
    let y: Vec<f64> = points.iter().map(|p| p.l_k).collect();
    let sig: Option<Vec<f64>> = points.iter().map(|p| p.sigma).collect();
    let line = fit_line(&x, &y, sig.as_deref()).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate("rank-deficient input: all n_sq are equal".into()),
        other => other,
    })?;
    Ok(SheetFit {
        l_sq: line.slope,
        intercept: line.intercept,
        covariance: [[line.var_slope, line.cov], [line.cov, line.var_intercept]],
    })
}

/// `Z0 = sqrt(l_kin / c0)` with `l_kin = L_sq / w` (H/m) and `c0` in F/m.
pub fn characteristic_impedance(l_sq: f64, w_strip: f64, c0: f64) -> Result<f64> {
    for (name, v) in [("l_sq", l_sq), ("w_strip", w_strip), ("c0", c0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    Ok((l_sq / w_strip / c0).sqrt())
}

/// Capacitance per unit length vs strip width, linearly interpolated and
/// clamped to the end values outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceTable {
    /// `(width m, c0 F/m)`, sorted by width.
    pub entries: Vec<(f64, f64)>,
}

impl CapacitanceTable {
    pub fn new(mut entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InsufficientData("capacitance table is empty".into()));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("capacitance table", "widths must be distinct"));
        }
        if entries.iter().any(|e| !(e.0 > 0.0 && e.1 > 0.0)) {
            return Err(Error::invalid("capacitance table", "entries must be positive"));
        }
        Ok(Self { entries })
    }

    /// 6.6 aF/µm at 2 µm to 8.4 aF/µm at 10 µm, coaxial tunnel.
    pub fn coaxial_tunnel() -> Self {
        Self { entries: vec![(2e-6, 6.6e-12), (10e-6, 8.4e-12)] }
    }

    pub fn c0(&self, width: f64) -> f64 {
        let e = &self.entries;
        if width <= e[0].0 {
            return e[0].1;
        }
        if width >= e[e.len() - 1].0 {
            return e[e.len() - 1].1;
        }
        let i = e.iter().position(|p| p.0 >= width).expect("inside the table");
        let (w0, c0) = e[i - 1];
        let (w1, c1) = e[i];
        c0 + (c1 - c0) * (width - w0) / (w1 - w0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_for_ten_and_a_half_nanohenry() {
        // Total inductance 10.5 nH with C_s = 90 fF, L_g = 500 pH.
        let f = 1.0 / (2.0 * PI * (10.5e-9f64 * 90e-15).sqrt());
        assert!((f / 5.177e9 - 1.0).abs() < 1e-4);
        let a = alpha_from_fr(f, 500e-12, 90e-15).unwrap();
        assert!((a - 10.0 / 10.5).abs() < 1e-12);
        assert!((alpha_from_fr(5.177e9, 500e-12, 90e-15).unwrap() - 0.9524).abs() < 1e-4);
        assert!((lk_from_alpha(a, 500e-12).unwrap() - 10e-9).abs() < 1e-20);
    }

    #[test]
    fn no_geometric_inductance_is_fully_kinetic() {
        assert_eq!(alpha_from_fr(5e9, 0.0, 90e-15).unwrap(), 1.0);
        assert_eq!(lk_from_alpha(0.0, 500e-12).unwrap(), 0.0);
    }

    #[test]
    fn unphysical_alpha() {
        assert!(matches!(alpha_from_fr(10e9, 10e-9, 90e-15), Err(Error::Unphysical(_))));
        assert!(lk_from_alpha(1.0, 500e-12).is_err());
    }

    #[test]
    fn two_point_line_is_exact() {
        let pts = [
            StripPoint { n_sq: 100.0, l_k: 3.2e-9, sigma: None },
            StripPoint { n_sq: 200.0, l_k: 6.4e-9, sigma: None },
        ];
        let f = sheet_inductance_fit(&pts).unwrap();
        assert!((f.l_sq - 32e-12).abs() < 1e-24);
        assert!(f.intercept.abs() < 1e-20);
    }

    #[test]
    fn equal_squares_rank_deficient() {
        let pts = [
            StripPoint { n_sq: 100.0, l_k: 3.2e-9, sigma: None },
            StripPoint { n_sq: 100.0, l_k: 3.3e-9, sigma: None },
        ];
        assert!(matches!(sheet_inductance_fit(&pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn impedance_examples() {
        let z = characteristic_impedance(320e-12, 2e-6, 6.6e-12).unwrap();
        assert!((z / 4.92e3 - 1.0).abs() < 0.01, "{z}");
        let z2 = characteristic_impedance(30e-12, 10e-6, 8.4e-12).unwrap();
        assert!((z2 - 597.6).abs() < 0.5, "{z2}");
        let z4 = characteristic_impedance(4.0 * 320e-12, 2e-6, 6.6e-12).unwrap();
        assert!((z4 / z - 2.0).abs() < 1e-14);
    }

    #[test]
    fn capacitance_table_interpolates() {
        let t = CapacitanceTable::coaxial_tunnel();
        assert_eq!(t.c0(2e-6), 6.6e-12);
        assert!((t.c0(6e-6) - 7.5e-12).abs() < 1e-24);
        assert_eq!(t.c0(20e-6), 8.4e-12);
    }
}
