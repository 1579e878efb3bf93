//! Effective Josephson-junction-array description of a disordered strip.
//!
//! The strip is treated as `N_JJ` identical junctions in series, each of
//! length `a_eff`. The self-Kerr shift per photon scales as `E_c/N_JJ²`, and
//! stray inductance outside the strip dilutes it further by `p²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{H_PLANCK, PHI0};
use crate::error::{Error, Result};
use crate::model::DeviceGeometry;
use crate::numeric::stats::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JjaModel {
    pub n_jj: f64,
    /// m.
    pub a_eff: f64,
    /// Inductance per junction, H.
    pub l_j: f64,
    /// A.
    pub i_c: f64,
    /// A/m².
    pub j_c: f64,
    /// Hz/photon.
    pub k_measured: f64,
    /// Hz/photon.
    pub k_strip: f64,
}

/// Self-Kerr estimate from a power sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrFit {
    /// Signed slope `df_r/dn̄`, Hz/photon.
    pub k: f64,
    pub k_sigma: f64,
    /// Zero-photon frequency, Hz.
    pub f_0: f64,
}

/// `(n̄, f_r)` pair from one power point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_bar: f64,
    pub f_r: f64,
    pub sigma_f: Option<f64>,
}

/// Linear fit `f_r(n̄) = f_0 + K·n̄`.
///
/// Requires at least three distinct photon numbers spanning a decade, given
/// in increasing order.
pub fn kerr_from_power_sweep(points: &[SweepPoint]) -> Result<KerrFit> {
    let mut n: Vec<f64> = points.iter().map(|p| p.n_bar).collect();
    if n.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("n_bar", "must increase monotonically through the sweep"));
    }
    n.dedup();
    if n.len() < 3 {
        return Err(Error::InsufficientData("need at least three distinct photon numbers".into()));
    }
    if !(n[0] > 0.0) || n[n.len() - 1] / n[0] < 10.0 {
        return Err(Error::InsufficientData("photon numbers must span at least one decade".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.n_bar).collect();
    let y: Vec<f64> = points.iter().map(|p| p.f_r).collect();
    let sig: Option<Vec<f64>> = points.iter().map(|p| p.sigma_f).collect();
    let line = fit_line(&x, &y, sig.as_deref())?;
    Ok(KerrFit { k: line.slope, k_sigma: line.var_slope.sqrt(), f_0: line.intercept })
}

/// Removes the participation dilution: `K_strip = K / p²`.
pub fn strip_kerr(k_measured: f64, p_strip: f64) -> Result<f64> {
    if !(p_strip > 0.0 && p_strip <= 1.0) {
        return Err(Error::invalid("p_strip", "must lie in (0, 1]"));
    }
    Ok(k_measured / (p_strip * p_strip))
}

/// Strip participation `p = L_strip / L_total`.
pub fn strip_participation(l_strip: f64, l_total: f64) -> Result<f64> {
    if !(l_strip >= 0.0 && l_total > 0.0 && l_strip <= l_total) {
        return Err(Error::invalid("l_strip", "must lie in [0, l_total]"));
    }
    Ok(l_strip / l_total)
}

/// `N_JJ = sqrt((E_c/h) / K_strip)` and `a_eff = l_strip / N_JJ`.
pub fn njj_from_kerr(k_strip: f64, e_c: f64, l_strip: f64) -> Result<(f64, f64)> {
    let k = k_strip.abs();
    if !(k > 0.0) {
        return Err(Error::invalid("k_strip", "must be non-zero"));
    }
    if !(e_c > 0.0 && l_strip > 0.0) {
        return Err(Error::invalid("e_c", "and l_strip must be positive"));
    }
    let n = (e_c / H_PLANCK / k).sqrt();
    Ok((n, l_strip / n))
}

/// Kerr coefficient of `n_jj` junctions, `K = E_c/(h·N_JJ²)` in Hz/photon.
pub fn kerr_from_njj(n_jj: f64, e_c: f64) -> f64 {
    e_c / H_PLANCK / (n_jj * n_jj)
}

/// Per-junction inductance `L_J = L_k_strip/N_JJ`, critical current
/// `I_c = Φ0/(2π·L_J)` and density `J_c = I_c/(w·t)` (uniform current).
pub fn critical_current_density(l_k_strip: f64, n_jj: f64, geometry: &DeviceGeometry) -> Result<(f64, f64, f64)> {
    if !(n_jj >= 1.0) {
        return Err(Error::invalid("n_jj", "must be at least 1"));
    }
    if !(l_k_strip > 0.0) {
        return Err(Error::invalid("l_k_strip", "must be positive"));
    }
    let l_j = l_k_strip / n_jj;
    let i_c = PHI0 / (2.0 * PI * l_j);
    Ok((l_j, i_c, i_c / geometry.cross_section()))
}

/// Full chain from a measured Kerr coefficient to the junction model.
pub fn infer_array(
    k_measured: f64,
    p_strip: f64,
    e_c: f64,
    l_k_strip: f64,
    geometry: &DeviceGeometry,
) -> Result<JjaModel> {
    let k_strip = strip_kerr(k_measured.abs(), p_strip)?;
    let (n_jj, a_eff) = njj_from_kerr(k_strip, e_c, geometry.l_strip)?;
    let (l_j, i_c, j_c) = critical_current_density(l_k_strip, n_jj, geometry)?;
    Ok(JjaModel { n_jj, a_eff, l_j, i_c, j_c, k_measured: k_measured.abs(), k_strip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::charging_energy;

    #[test]
    fn exact_kerr_line() {
        let pts: Vec<SweepPoint> = [1.0, 3.0, 10.0, 30.0, 100.0]
            .iter()
            .map(|&n| SweepPoint { n_bar: n, f_r: 6.04e9 - 2.15 * n, sigma_f: None })
            .collect();
        let k = kerr_from_power_sweep(&pts).unwrap();
        assert!((k.k + 2.15).abs() < 1e-6, "{}", k.k);
    }

    #[test]
    fn sweep_validation() {
        let mk = |n: &[f64]| -> Vec<SweepPoint> {
            n.iter().map(|&n| SweepPoint { n_bar: n, f_r: 6e9, sigma_f: None }).collect()
        };
        assert!(kerr_from_power_sweep(&mk(&[1.0, 2.0, 5.0])).is_err());
        assert!(kerr_from_power_sweep(&mk(&[1.0, 100.0, 10.0])).is_err());
        assert!(kerr_from_power_sweep(&mk(&[1.0, 100.0])).is_err());
    }

    #[test]
    fn participation_correction() {
        assert_eq!(strip_kerr(1.3, 1.0).unwrap(), 1.3);
        assert!((strip_kerr(1.0, 0.8).unwrap() - 1.5625).abs() < 1e-15);
        assert!(strip_kerr(1.0, 0.0).is_err());
    }

    #[test]
    fn ten_thousand_junctions() {
        let ec = charging_energy(90e-15);
        let k = kerr_from_njj(1e4, ec);
        assert!((k - 2.152).abs() < 1e-3);
        let (n, a) = njj_from_kerr(k, ec, 150e-6).unwrap();
        assert!((n / 1e4 - 1.0).abs() < 1e-12);
        assert!((a / 15e-9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn critical_current_scaling() {
        let g = DeviceGeometry { l_strip: 150e-6, w_strip: 3e-6, thickness: 91e-9 };
        let (lj, ic, jc) = critical_current_density(10e-9, 1e4, &g).unwrap();
        assert!((lj - 1e-12).abs() < 1e-24);
        assert!((ic / 329e-6 - 1.0).abs() < 1e-3, "{ic}");
        assert!((jc / 1e4 / 1.2e5 - 1.0).abs() < 0.01, "{jc}");
        let (lj2, ic2, _) = critical_current_density(10e-9, 2e4, &g).unwrap();
        assert!((lj / lj2 - 2.0).abs() < 1e-14);
        assert!((ic2 / ic - 2.0).abs() < 1e-14);
    }
}
