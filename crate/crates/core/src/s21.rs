//! Hanger-mode transmission: forward model, photon number, and the inverse
//! map from a point on the resonance circle to fractional detuning.
//!
//! ```text
//! S21(ω) = 1 − (Q_L/|Q_c|)·e^{iφ} / (1 + 2i·Q_L·(ω/ω_r − 1))
//! ```
//!
//! As the detuning sweeps the real line, `S21` traces a circle of diameter
//! `Q_L/|Q_c|` centred on `1 − (Q_L/|Q_c|)·e^{iφ}/2` that touches `1 + 0i`
//! at infinite detuning.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::model::{ComplexTrace, HangerParams};

/// `|1 − S|` below this is the off-resonant singular point.
pub const SINGULAR_TOL: f64 = 1e-12;

/// A transmission sample together with the detuning it represents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningPoint {
    pub s_value: Complex64,
    /// `ω/ω_r − 1`.
    pub detuning_x: f64,
}

/// Response of the measurement chain around the resonator:
/// `S_meas = amplitude · exp(i·(phase − 2π·f·delay)) · S21`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub amplitude: f64,
    pub phase: f64,
    /// Cable delay, s.
    pub delay: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self { amplitude: 1.0, phase: 0.0, delay: 0.0 }
    }
}

impl Environment {
    pub fn factor(&self, f: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase - 2.0 * PI * f * self.delay)
    }

    /// Removes the environment from a measured sample taken at frequency `f`.
    pub fn remove(&self, f: f64, z: Complex64) -> Complex64 {
        z / self.factor(f)
    }
}

/// `S21` at fractional detuning `x = ω/ω_r − 1`.
pub fn s21_at_detuning(p: &HangerParams, x: f64) -> Complex64 {
    let ql = p.q_loaded();
    Complex64::new(1.0, 0.0) - p.dip() / Complex64::new(1.0, 2.0 * ql * x)
}

pub fn s21_at(p: &HangerParams, f: f64) -> Complex64 {
    s21_at_detuning(p, f / p.f_r - 1.0)
}

/// Evaluates the hanger response on a frequency grid.
pub fn s21_hanger(p: &HangerParams, freqs: &[f64]) -> Result<ComplexTrace> {
    p.validate()?;
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::invalid("freqs", "must be finite"));
    }
    let values = freqs.iter().map(|&f| s21_at(p, f)).collect();
    ComplexTrace::frequency(freqs.to_vec(), values)
}

/// Mean intracavity photon number `n̄ = 2·Q_L²·P_in / (ħ·ω_r²·|Q_c|)`.
pub fn photon_number(p: &HangerParams, power_in: f64) -> Result<f64> {
    if !(power_in >= 0.0) || !power_in.is_finite() {
        return Err(Error::invalid("power_in", "must be non-negative"));
    }
    let ql = p.q_loaded();
    let w = p.omega_r();
    Ok(2.0 * ql * ql / (HBAR * w * w * p.q_c_mag) * power_in)
}

/// Input power that yields `n̄` photons (inverse of [`photon_number`]).
pub fn power_for_photons(p: &HangerParams, n_bar: f64) -> f64 {
    let ql = p.q_loaded();
    let w = p.omega_r();
    n_bar * HBAR * w * w * p.q_c_mag / (2.0 * ql * ql)
}

/// Centre of the normalized resonance circle.
pub fn circle_center(p: &HangerParams) -> Complex64 {
    Complex64::new(1.0, 0.0) - 0.5 * p.dip()
}

/// Radial projection of `z` onto the resonance circle.
pub fn project_onto_circle(p: &HangerParams, z: Complex64) -> Result<Complex64> {
    let c = circle_center(p);
    let d = z - c;
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::Degenerate("point coincides with the circle centre".into()));
    }
    Ok(c + d * (0.5 * p.diameter() / n))
}

/// Fractional detuning represented by a (possibly noisy) sample.
///
/// The sample is projected radially onto the circle, then inverted
/// algebraically: `x = Im[(Q_L/|Q_c|)·e^{iφ} / (1 − S)] / (2·Q_L)`.
pub fn detuning_from_point(point: Complex64, p: &HangerParams) -> Result<f64> {
    let one = Complex64::new(1.0, 0.0);
    let gap = (one - point).norm();
    if gap < SINGULAR_TOL {
        return Err(Error::SingularPoint(gap));
    }
    let s = project_onto_circle(p, point)?;
    let gap = (one - s).norm();
    if gap < SINGULAR_TOL {
        return Err(Error::SingularPoint(gap));
    }
    Ok((p.dip() / (one - s)).im / (2.0 * p.q_loaded()))
}

pub fn detuning_point(point: Complex64, p: &HangerParams) -> Result<DetuningPoint> {
    Ok(DetuningPoint { s_value: point, detuning_x: detuning_from_point(point, p)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fo23(phi: f64) -> HangerParams {
        HangerParams::new(6.04e9, 1.78e6, 1.30e6, phi).unwrap()
    }

    #[test]
    fn far_detuning_tends_to_unity() {
        let p = fo23(0.4);
        let z = s21_at_detuning(&p, 1e6);
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn critical_coupling_depth_is_half() {
        let p = HangerParams::new(5e9, 1e6, 1e6, 0.0).unwrap();
        let z = s21_at(&p, 5e9);
        assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fo23_depth() {
        let p = fo23(0.0);
        // Q_L = 1/(1/1.78e6 + 1/1.30e6); depth = 1 − Q_L/Q_c, evaluated by hand.
        let ql: f64 = 1.0 / (1.0 / 1.78e6 + 1.0 / 1.30e6);
        assert!((ql - 7.513e5).abs() < 50.0);
        let z = s21_at(&p, 6.04e9);
        assert!((z.re - (1.0 - ql / 1.30e6)).abs() < 1e-14);
        assert!((z.re - 0.4221).abs() < 1e-4);
        assert!(z.im.abs() < 1e-15);
    }

    #[test]
    fn photon_number_fo23_single_photon() {
        let n = photon_number(&fo23(0.0), 1.75e-19).unwrap();
        assert!((n - 1.0).abs() < 0.01, "{n}");
        assert_eq!(photon_number(&fo23(0.0), 0.0).unwrap(), 0.0);
        let n2 = photon_number(&fo23(0.0), 3.5e-19).unwrap();
        assert!((n2 / n - 2.0).abs() < 1e-14);
        assert!(photon_number(&fo23(0.0), -1.0).is_err());
    }

    #[test]
    fn on_resonance_inverts_to_zero() {
        let p = fo23(0.2);
        let x = detuning_from_point(s21_at_detuning(&p, 0.0), &p).unwrap();
        assert!(x.abs() < 1e-18);
    }

    #[test]
    fn small_detuning_round_trip() {
        let p = fo23(-0.3);
        let x = detuning_from_point(s21_at_detuning(&p, 1e-6), &p).unwrap();
        assert!((x - 1e-6).abs() < 1e-12);
    }

    #[test]
    fn off_resonant_point_is_singular() {
        let p = fo23(0.0);
        assert!(matches!(
            detuning_from_point(Complex64::new(1.0, 0.0), &p),
            Err(Error::SingularPoint(_))
        ));
    }

    #[test]
    fn radial_projection_recovers_detuning() {
        let p = fo23(0.1);
        let z = s21_at_detuning(&p, 2e-7);
        let c = circle_center(&p);
        let pushed = c + (z - c) * 1.05;
        let x = detuning_from_point(pushed, &p).unwrap();
        assert!((x - 2e-7).abs() < 1e-15);
    }

    #[test]
    fn environment_round_trip() {
        let env = Environment { amplitude: 0.3, phase: 1.1, delay: 40e-9 };
        let z = Complex64::new(0.2, -0.7);
        let back = env.remove(6e9, z * env.factor(6e9));
        assert!((back - z).norm() < 1e-14);
    }
}
