//! BCS gap, Mattis-Bardeen complex conductivity and the thin-film
//! frequency shift versus temperature.
//!
//! With `f(E)` the Fermi function, `ħω` the photon energy and conductivities
//! normalized to the normal state `σn`:
//!
//! ```text
//! σ1/σn = (2/ħω) ∫_Δ^∞ [f(E) − f(E+ħω)] g(E) dE
//!       + (1/ħω) ∫_{Δ−ħω}^{−Δ} [1 − 2f(E+ħω)] |g(E)| dE        (ħω > 2Δ only)
//! σ2/σn = (1/ħω) ∫_{max(Δ−ħω, −Δ)}^{Δ} [1 − 2f(E+ħω)] h(E) dE
//!
//! g(E) = (E² + Δ² + ħωE) / (√(E²−Δ²) · √((E+ħω)²−Δ²))
//! h(E) = (E² + Δ² + ħωE) / (√(Δ²−E²) · √((E+ħω)²−Δ²))
//! ```
//!
//! The first σ1 term uses `E = Δ·cosh u`. The finite-interval integrals use
//! `E = a + (b−a)·sin²(θ/2)`, `θ ∈ [0, π]`, which absorbs the inverse
//! square-root factor at each endpoint.
//!
//! The gap solves `ln(Δ0/Δ) = 2 ∫_0^∞ f(Δ·cosh u) du` with `Δ0 = 1.764·k_B·T_c`.
//!
//! Thin film (`t ≪ λ`): `Z_s ∝ 1/σ`, so `δZ = −(δσ/σ_ref)·Z_ref`, and
//! `Δf/f = −(α/2)·Im δZ / Im Z_ref`, `Δ(1/Q) = α·Re δZ / Im Z_ref`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{BCS_GAP_RATIO, HBAR, K_B};
use crate::error::{Error, Result};
use crate::numeric::lm::{LeastSquares, LevenbergMarquardt};
use crate::numeric::quad::{integrate, QuadSettings};
use crate::numeric::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbSettings {
    pub quad_rel_tol: f64,
    pub max_subdivisions: usize,
    /// Relative tolerance on Δ.
    pub gap_rel_tol: f64,
    /// Reference temperature for shifts, K.
    pub t_ref: f64,
}

impl Default for MbSettings {
    fn default() -> Self {
        Self { quad_rel_tol: 1e-9, max_subdivisions: 2000, gap_rel_tol: 1e-12, t_ref: 0.0 }
    }
}

impl MbSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_rel_tol > 0.0 && self.gap_rel_tol > 0.0 && self.max_subdivisions > 0) {
            return Err(Error::invalid("mb settings", "tolerances must be positive"));
        }
        if !(self.t_ref >= 0.0) {
            return Err(Error::invalid("t_ref", "must be non-negative"));
        }
        Ok(())
    }

    fn quad(&self) -> QuadSettings {
        QuadSettings { rel_tol: self.quad_rel_tol, abs_tol: 0.0, max_subdivisions: self.max_subdivisions }
    }
}

fn fermi(e: f64, kt: f64) -> f64 {
    if kt == 0.0 {
        return if e > 0.0 {
            0.0
        } else if e < 0.0 {
            1.0
        } else {
            0.5
        };
    }
    let x = e / kt;
    if x > 0.0 {
        let m = (-x).exp();
        m / (1.0 + m)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `1 − 2f(E) = tanh(E/2kT)`.
fn one_minus_2f(e: f64, kt: f64) -> f64 {
    if kt == 0.0 {
        return e.signum();
    }
    (e / (2.0 * kt)).tanh()
}

/// `f(a) − f(b)` for `b > a`, without cancellation.
fn fermi_difference(a: f64, b: f64, kt: f64) -> f64 {
    if kt == 0.0 {
        return fermi(a, 0.0) - fermi(b, 0.0);
    }
    let (xa, xb) = (a / kt, b / kt);
    if xa > 700.0 {
        return 0.0;
    }
    (xb - xa).exp_m1() / ((1.0 + (-xa).exp()) * (xb.exp() + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    /// J.
    pub delta: f64,
    /// `T ≥ T_c` or no finite solution of the gap equation.
    pub normal: bool,
}

/// Self-consistent BCS gap at temperature `t`.
pub fn gap_at_temperature(t: f64, t_c: f64) -> Result<GapSolution> {
    gap_with(t, t_c, &MbSettings::default())
}

fn gap_with(t: f64, t_c: f64, s: &MbSettings) -> Result<GapSolution> {
    if !(t >= 0.0 && t_c > 0.0) {
        return Err(Error::invalid("t", "must be non-negative with positive t_c"));
    }
    let delta0 = BCS_GAP_RATIO * K_B * t_c;
    if t >= t_c {
        return Ok(GapSolution { delta: 0.0, normal: true });
    }
    if t == 0.0 {
        return Ok(GapSolution { delta: delta0, normal: false });
    }
    let kt = K_B * t;
    let q = s.quad();
    let residual = |d: f64| -> f64 {
        let u_max = (60.0 * kt / d).max(1.0).acosh() + 1.0;
        let i = integrate(|u| fermi(d * u.cosh(), kt), 0.0, u_max, &q).map(|r| r.value).unwrap_or(f64::NAN);
        (delta0 / d).ln() - 2.0 * i
    };
    let lo = delta0 * 1e-9;
    if residual(lo) <= 0.0 {
        return Ok(GapSolution { delta: 0.0, normal: true });
    }
    let d = brent(residual, lo, delta0, s.gap_rel_tol * delta0, 200)?;
    Ok(GapSolution { delta: d, normal: false })
}

/// `σ1/σn` and `σ2/σn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conductivity {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Conductivity {
    /// `σ = σ1 − iσ2`.
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.sigma1, -self.sigma2)
    }
}

pub fn complex_conductivity(t: f64, f: f64, t_c: f64, s: &MbSettings) -> Result<Conductivity> {
    s.validate()?;
    if !(f > 0.0) {
        return Err(Error::invalid("f", "must be positive"));
    }
    let gap = gap_with(t, t_c, s)?;
    if gap.normal {
        return Ok(Conductivity { sigma1: 1.0, sigma2: 0.0 });
    }
    conductivity_for_gap(gap.delta, K_B * t, HBAR * 2.0 * PI * f, s)
}

fn conductivity_for_gap(d: f64, kt: f64, hw: f64, s: &MbSettings) -> Result<Conductivity> {
    let q = s.quad();
    let num = |e: f64| e * e + d * d + hw * e;

    let mut sigma1 = 0.0;
    if kt > 0.0 {
        let u_max = ((d + 60.0 * kt) / d).acosh();
        let thermal = integrate(
            |u| {
                let e = d * u.cosh();
                let ep = e + hw;
                fermi_difference(e, ep, kt) * num(e) / ((ep - d) * (ep + d)).sqrt()
            },
            0.0,
            u_max,
            &q,
        )?;
        sigma1 += 2.0 / hw * thermal.value;
    }

    let pair_breaking = hw > 2.0 * d;
    if pair_breaking {
        // E ∈ [Δ−ħω, −Δ]; E − a = (b−a)·sin², b − E = (b−a)·cos².
        let (a, b) = (d - hw, -d);
        let pb = integrate(
            |th| {
                let sn = (0.5 * th).sin();
                let e = a + (b - a) * sn * sn;
                one_minus_2f(e + hw, kt) * num(e).abs() / ((d - e).sqrt() * (e + hw + d).sqrt())
            },
            0.0,
            PI,
            &q,
        )?;
        sigma1 += pb.value / hw;
    }

    let sigma2 = if pair_breaking {
        // E ∈ [−Δ, Δ]: the √(Δ²−E²) factor is absorbed.
        let (a, b) = (-d, d);
        integrate(
            |th| {
                let sn = (0.5 * th).sin();
                let e = a + (b - a) * sn * sn;
                let ep = e + hw;
                one_minus_2f(ep, kt) * num(e) / ((ep - d) * (ep + d)).sqrt()
            },
            0.0,
            PI,
            &q,
        )?
        .value
            / hw
    } else {
        // E ∈ [Δ−ħω, Δ]: √(Δ−E)·√(E+ħω−Δ) is absorbed.
        let (a, b) = (d - hw, d);
        integrate(
            |th| {
                let sn = (0.5 * th).sin();
                let e = a + (b - a) * sn * sn;
                one_minus_2f(e + hw, kt) * num(e) / ((d + e).sqrt() * (e + hw + d).sqrt())
            },
            0.0,
            PI,
            &q,
        )?
        .value
            / hw
    };
    Ok(Conductivity { sigma1, sigma2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub t: f64,
    /// Hz.
    pub delta_f: f64,
    pub delta_inv_q: f64,
}

/// Frequency shift and conductor-loss change relative to `settings.t_ref`.
pub fn freq_shift_vs_temperature(
    temps: &[f64],
    f_r0: f64,
    alpha: f64,
    t_c: f64,
    s: &MbSettings,
) -> Result<Vec<ShiftPoint>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1]"));
    }
    if s.t_ref >= t_c {
        return Err(Error::invalid("t_ref", "must lie below t_c"));
    }
    let sig_ref = complex_conductivity(s.t_ref, f_r0, t_c, s)?.complex();
    let z_ref = 1.0 / sig_ref;
    temps
        .iter()
        .map(|&t| {
            if !(t >= 0.0) {
                return Err(Error::invalid("t", "must be non-negative"));
            }
            let d_sigma = complex_conductivity(t, f_r0, t_c, s)?.complex() - sig_ref;
            let dz = -d_sigma / sig_ref * z_ref;
            Ok(ShiftPoint {
                t,
                delta_f: -0.5 * alpha * dz.im / z_ref.im * f_r0,
                delta_inv_q: alpha * dz.re / z_ref.im,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcFit {
    pub t_c: f64,
    pub t_c_sigma: f64,
    /// Constant added to the model shift when enabled, Hz.
    pub offset: Option<f64>,
    pub offset_sigma: Option<f64>,
    pub residual_rms: f64,
    pub iterations: usize,
}

struct TcProblem<'a> {
    t: &'a [f64],
    df: &'a [f64],
    f_r0: f64,
    alpha: f64,
    offset: bool,
    s: &'a MbSettings,
}

impl TcProblem<'_> {
    fn model(&self, t_c: f64) -> Option<Vec<f64>> {
        freq_shift_vs_temperature(self.t, self.f_r0, self.alpha, t_c, self.s)
            .ok()
            .map(|v| v.into_iter().map(|p| p.delta_f).collect())
    }
}

impl LeastSquares for TcProblem<'_> {
    fn n_params(&self) -> usize {
        if self.offset {
            2
        } else {
            1
        }
    }
    fn n_residuals(&self) -> usize {
        self.t.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let off = if self.offset { p[1] } else { 0.0 };
        match self.model(p[0]) {
            Some(m) => {
                for i in 0..out.len() {
                    out[i] = m[i] + off - self.df[i];
                }
            }
            None => out.iter_mut().for_each(|r| *r = f64::INFINITY),
        }
    }
}

/// Fits `T_c` (and optionally a constant offset) to measured `(T, Δf)` pairs
/// at fixed `α`.
pub fn fit_tc(points: &[(f64, f64)], f_r0: f64, alpha: f64, with_offset: bool, s: &MbSettings) -> Result<TcFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientData("T_c fit needs at least five points".into()));
    }
    if points.iter().any(|p| !(p.0 >= 0.0 && p.1.is_finite())) {
        return Err(Error::invalid("points", "need non-negative temperatures and finite shifts"));
    }
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let df: Vec<f64> = points.iter().map(|p| p.1).collect();
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let t_min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let prob = TcProblem { t: &t, df: &df, f_r0, alpha, offset: with_offset, s };

    // Coarse scan for a starting T_c above the hottest point.
    let lower = t_max.max(s.t_ref) * (1.0 + 1e-6);
    let mut best = (f64::INFINITY, lower * 1.5, 0.0);
    for k in 0..40 {
        let tc = lower * (1.0 + 0.005 * 1.15f64.powi(k));
        if let Some(m) = prob.model(tc) {
            let off = if with_offset {
                df.iter().zip(&m).map(|(d, m)| d - m).sum::<f64>() / m.len() as f64
            } else {
                0.0
            };
            let ss: f64 = m.iter().zip(&df).map(|(m, d)| (m + off - d).powi(2)).sum();
            if ss < best.0 {
                best = (ss, tc, off);
            }
        }
    }
    if t_max - t_min < 0.3 * best.1 {
        return Err(Error::InsufficientData(format!(
            "temperatures span {:.3} K; need at least 0.3 T_c ({:.3} K)",
            t_max - t_min,
            0.3 * best.1
        )));
    }
    let (p0, lo, hi) = if with_offset {
        (vec![best.1, best.2], vec![lower, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY])
    } else {
        (vec![best.1], vec![lower], vec![f64::INFINITY])
    };
    let lm = LevenbergMarquardt { max_iter: 100, fd_step: 1e-7, ..Default::default() }.with_bounds(lo, hi);
    let out = lm.minimize(&prob, &p0);
    if !out.converged() || !out.sum_sq.is_finite() {
        return Err(Error::NonConvergence(format!("T_c fit stopped: {:?}", out.termination)));
    }
    Ok(TcFit {
        t_c: out.params[0],
        t_c_sigma: out.sigma(0),
        offset: with_offset.then(|| out.params[1]),
        offset_sigma: with_offset.then(|| out.sigma(1)),
        residual_rms: (out.sum_sq / points.len() as f64).sqrt(),
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TC: f64 = 2.15;

    #[test]
    fn gap_limits() {
        let d0 = BCS_GAP_RATIO * K_B * TC;
        assert_eq!(gap_at_temperature(0.0, TC).unwrap().delta, d0);
        let g = gap_at_temperature(TC, TC).unwrap();
        assert!(g.normal && g.delta == 0.0);
        let low = gap_at_temperature(0.1 * TC, TC).unwrap();
        assert!((low.delta / d0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gap_decreases_with_temperature() {
        let mut last = f64::INFINITY;
        for i in 1..10 {
            let d = gap_at_temperature(0.1 * i as f64 * TC, TC).unwrap().delta;
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn normal_state_above_tc() {
        let c = complex_conductivity(3.0, 4.6e9, TC, &MbSettings::default()).unwrap();
        assert_eq!((c.sigma1, c.sigma2), (1.0, 0.0));
    }

    #[test]
    fn zero_temperature_limit() {
        let s = MbSettings::default();
        for f in [2e9, 4e9, 8e9] {
            let c = complex_conductivity(0.0, f, TC, &s).unwrap();
            let d0 = BCS_GAP_RATIO * K_B * TC;
            let expect = PI * d0 / (HBAR * 2.0 * PI * f);
            assert_eq!(c.sigma1, 0.0);
            assert!((c.sigma2 / expect - 1.0).abs() < 1e-3, "{f}: {} vs {expect}", c.sigma2);
        }
    }

    #[test]
    fn pair_breaking_branch_is_positive() {
        let s = MbSettings::default();
        let d0 = BCS_GAP_RATIO * K_B * TC;
        let f = 6.0 * d0 / (HBAR * 2.0 * PI);
        let c = complex_conductivity(0.0, f, TC, &s).unwrap();
        assert!(c.sigma1 > 0.0 && c.sigma1 < 1.0, "{}", c.sigma1);
        assert!(c.sigma2 > 0.0);
    }

    #[test]
    fn shift_zero_at_reference_and_decreasing() {
        let s = MbSettings::default();
        let temps: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64 * TC).collect();
        let pts = freq_shift_vs_temperature(&[0.0], 4.6e9, 0.96, TC, &s).unwrap();
        assert_eq!(pts[0].delta_f, 0.0);
        let pts = freq_shift_vs_temperature(&temps, 4.6e9, 0.96, TC, &s).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].delta_f < w[0].delta_f);
            assert!(w[1].delta_inv_q >= 0.0);
        }
    }

    #[test]
    fn noiseless_tc_recovery() {
        let s = MbSettings::default();
        let temps: Vec<f64> = (0..8).map(|i| 0.5 + 0.15 * i as f64).collect();
        let pts: Vec<(f64, f64)> = freq_shift_vs_temperature(&temps, 4.6e9, 0.96, TC, &s)
            .unwrap()
            .into_iter()
            .map(|p| (p.t, p.delta_f))
            .collect();
        let fit = fit_tc(&pts, 4.6e9, 0.96, false, &s).unwrap();
        assert!((fit.t_c / TC - 1.0).abs() < 1e-6, "{}", fit.t_c);
    }
}
