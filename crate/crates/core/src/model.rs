//! Shared domain types. Every quantity is stored in SI units.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{BCS_GAP_RATIO, E_CHARGE, K_B};
use crate::error::{Error, Result, Violation};

/// Parameters of the notch-type (hanger) resonance.
///
/// The external quality factor is complex, `Q_c = |Q_c|·exp(-iφ)`, and the
/// loaded quality factor follows `1/Q_L = 1/Q_int + cos(φ)/|Q_c|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HangerParams {
    pub f_r: f64,
    pub q_int: f64,
    pub q_c_mag: f64,
    pub phi: f64,
}

impl HangerParams {
    pub fn new(f_r: f64, q_int: f64, q_c_mag: f64, phi: f64) -> Result<Self> {
        let p = Self { f_r, q_int, q_c_mag, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        positive(&mut v, "f_r", self.f_r);
        positive(&mut v, "q_int", self.q_int);
        positive(&mut v, "q_c_mag", self.q_c_mag);
        if !(self.phi.is_finite() && self.phi > -PI && self.phi <= PI) {
            v.push(violation("phi", "must lie in (-pi, pi]"));
        }
        if v.is_empty() && !(self.q_loaded() > 0.0) {
            v.push(violation("phi", "gives a non-positive loaded quality factor"));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn omega_r(&self) -> f64 {
        2.0 * PI * self.f_r
    }

    /// Real part of the inverse external quality factor, `cos(φ)/|Q_c|`.
    pub fn re_inv_q_c(&self) -> f64 {
        self.phi.cos() / self.q_c_mag
    }

    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_int + self.re_inv_q_c())
    }

    /// Circle diameter `Q_L/|Q_c|` of the normalized response.
    pub fn diameter(&self) -> f64 {
        self.q_loaded() / self.q_c_mag
    }

    /// The complex dip amplitude `(Q_L/|Q_c|)·exp(iφ)`.
    pub fn dip(&self) -> Complex64 {
        Complex64::from_polar(self.diameter(), self.phi)
    }

    /// Full width at half maximum of the resonance in Hz.
    pub fn linewidth(&self) -> f64 {
        self.f_r / self.q_loaded()
    }
}

/// Independent variable of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Frequencies in Hz, strictly increasing.
    Frequency(Vec<f64>),
    /// Sample times in s (zero-span acquisition).
    Time(Vec<f64>),
}

impl SweepAxis {
    pub fn points(&self) -> &[f64] {
        match self {
            SweepAxis::Frequency(p) | SweepAxis::Time(p) => p,
        }
    }

    pub fn is_frequency(&self) -> bool {
        matches!(self, SweepAxis::Frequency(_))
    }
}

/// Complex transmission record with acquisition metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTrace {
    pub axis: SweepAxis,
    pub values: Vec<Complex64>,
    /// Input power at the chip, W.
    pub power_in: Option<f64>,
    /// Sample temperature, K.
    pub temperature: Option<f64>,
    /// Optional per-point noise estimate (per quadrature), used as fit weights.
    pub noise_sigma: Option<Vec<f64>>,
    /// Free-form metadata (`key = value`), e.g. embedded generator truth.
    pub meta: BTreeMap<String, String>,
}

impl ComplexTrace {
    pub fn frequency(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        Self::with_axis(SweepAxis::Frequency(freqs), values)
    }

    pub fn time(times: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        Self::with_axis(SweepAxis::Time(times), values)
    }

    fn with_axis(axis: SweepAxis, values: Vec<Complex64>) -> Result<Self> {
        let t = Self {
            axis,
            values,
            power_in: None,
            temperature: None,
            noise_sigma: None,
            meta: BTreeMap::new(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let pts = self.axis.points();
        if pts.len() != self.values.len() {
            v.push(violation(
                "values",
                &format!("length {} differs from axis length {}", self.values.len(), pts.len()),
            ));
        }
        if pts.iter().any(|x| !x.is_finite()) {
            v.push(violation("axis", "contains non-finite entries"));
        }
        let name = if self.axis.is_frequency() { "frequency" } else { "time" };
        if pts.windows(2).any(|w| !(w[1] > w[0])) {
            v.push(violation(name, "axis must be strictly increasing"));
        }
        if self.values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            v.push(violation("values", "contain NaN or infinite samples"));
        }
        if let Some(p) = self.power_in {
            if !(p >= 0.0) {
                v.push(violation("power_in", "must be non-negative"));
            }
        }
        if let Some(s) = &self.noise_sigma {
            if s.len() != self.values.len() || s.iter().any(|x| !(*x > 0.0)) {
                v.push(violation("noise_sigma", "must be positive and match the trace length"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Frequencies, or `None` for a time-mode trace.
    pub fn freqs(&self) -> Option<&[f64]> {
        match &self.axis {
            SweepAxis::Frequency(f) => Some(f),
            SweepAxis::Time(_) => None,
        }
    }

    pub fn times(&self) -> Option<&[f64]> {
        match &self.axis {
            SweepAxis::Time(t) => Some(t),
            SweepAxis::Frequency(_) => None,
        }
    }

    /// Keep every `step`-th point, starting with the first.
    pub fn decimate(&self, step: usize) -> Self {
        let step = step.max(1);
        let pick = |v: &[f64]| v.iter().step_by(step).copied().collect::<Vec<_>>();
        let axis = match &self.axis {
            SweepAxis::Frequency(f) => SweepAxis::Frequency(pick(f)),
            SweepAxis::Time(t) => SweepAxis::Time(pick(t)),
        };
        Self {
            axis,
            values: self.values.iter().step_by(step).copied().collect(),
            power_in: self.power_in,
            temperature: self.temperature,
            noise_sigma: self.noise_sigma.as_deref().map(pick),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub l_strip: f64,
    pub w_strip: f64,
    pub thickness: f64,
}

impl DeviceGeometry {
    /// Number of squares `l_strip / w_strip`.
    pub fn n_sq(&self) -> f64 {
        self.l_strip / self.w_strip
    }

    pub fn cross_section(&self) -> f64 {
        self.w_strip * self.thickness
    }

    fn violations(&self, v: &mut Vec<Violation>) {
        positive(v, "l_strip", self.l_strip);
        positive(v, "w_strip", self.w_strip);
        positive(v, "thickness", self.thickness);
    }
}

/// Whether the gap was supplied or derived from the BCS relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapSource {
    Supplied,
    BcsFromTc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmProperties {
    /// Normal-state resistivity, Ω·m.
    pub rho_n: f64,
    /// Sheet resistance, Ω/sq.
    pub r_sq: f64,
    /// Sheet kinetic inductance, H/sq.
    pub l_sq: f64,
    pub t_c: f64,
    /// Zero-temperature gap, J.
    pub delta0: f64,
    pub gap_source: GapSource,
}

impl FilmProperties {
    /// Builds the film from its resistivity; `r_sq = rho_n / thickness`.
    /// Without an explicit gap, `Δ0 = 1.764·k_B·T_c`.
    pub fn new(rho_n: f64, thickness: f64, l_sq: f64, t_c: f64, delta0: Option<f64>) -> Self {
        let (delta0, gap_source) = match delta0 {
            Some(d) => (d, GapSource::Supplied),
            None => (bcs_gap(t_c), GapSource::BcsFromTc),
        };
        Self {
            rho_n,
            r_sq: rho_n / thickness,
            l_sq,
            t_c,
            delta0,
            gap_source,
        }
    }

    fn violations(&self, thickness: f64, v: &mut Vec<Violation>) {
        positive(v, "rho_n", self.rho_n);
        positive(v, "r_sq", self.r_sq);
        positive(v, "l_sq", self.l_sq);
        positive(v, "t_c", self.t_c);
        positive(v, "delta0", self.delta0);
        if self.rho_n > 0.0 && thickness > 0.0 {
            let mismatch = (self.r_sq * thickness - self.rho_n).abs();
            if mismatch > 8.0 * f64::EPSILON * self.rho_n {
                v.push(violation("r_sq", "must equal rho_n / thickness"));
            }
        }
        if self.gap_source == GapSource::BcsFromTc
            && (self.delta0 - bcs_gap(self.t_c)).abs() > 1e-12 * self.delta0.abs()
        {
            v.push(violation("delta0", "flagged as BCS-derived but differs from 1.764 k_B T_c"));
        }
    }
}

/// `Δ0 = 1.764·k_B·T_c`.
pub fn bcs_gap(t_c: f64) -> f64 {
    BCS_GAP_RATIO * K_B * t_c
}

/// Lumped circuit of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitModel {
    pub l_g: f64,
    pub c_s: f64,
    pub l_k: f64,
    pub alpha: f64,
    /// Single-electron charging energy of the shunt capacitor, J.
    pub e_c: f64,
    pub p_strip: f64,
}

impl CircuitModel {
    pub fn new(l_g: f64, c_s: f64, l_k: f64, p_strip: f64) -> Self {
        Self {
            l_g,
            c_s,
            l_k,
            alpha: l_k / (l_k + l_g),
            e_c: charging_energy(c_s),
            p_strip,
        }
    }

    /// `1/(2π·sqrt((L_k + L_g)·C_s))`.
    pub fn resonance_frequency(&self) -> f64 {
        1.0 / (2.0 * PI * ((self.l_k + self.l_g) * self.c_s).sqrt())
    }

    fn violations(&self, v: &mut Vec<Violation>) {
        positive(v, "l_g", self.l_g);
        positive(v, "c_s", self.c_s);
        if !(self.l_k >= 0.0) {
            v.push(violation("l_k", "must be non-negative"));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            v.push(violation("alpha", "must lie in [0, 1)"));
        }
        if !(self.p_strip >= 0.0 && self.p_strip <= 1.0) {
            v.push(violation("p_strip", "must lie in [0, 1]"));
        }
        if self.c_s > 0.0 {
            let expect = charging_energy(self.c_s);
            if (self.e_c - expect).abs() > 1e-12 * expect {
                v.push(violation("e_c", "must equal e^2/(2 c_s)"));
            }
        }
    }
}

/// `E_c = e²/(2·C_s)` in J.
pub fn charging_energy(c_s: f64) -> f64 {
    E_CHARGE * E_CHARGE / (2.0 * c_s)
}

/// Geometry, film and circuit that passed [`validate_device`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceBundle {
    pub geometry: DeviceGeometry,
    pub film: FilmProperties,
    pub circuit: CircuitModel,
}

/// Checks every type invariant and returns the bundle, or all violations at once.
pub fn validate_device(
    geometry: DeviceGeometry,
    film: FilmProperties,
    circuit: CircuitModel,
) -> Result<DeviceBundle> {
    let mut v = Vec::new();
    geometry.violations(&mut v);
    film.violations(geometry.thickness, &mut v);
    circuit.violations(&mut v);
    if v.is_empty() {
        Ok(DeviceBundle { geometry, film, circuit })
    } else {
        Err(Error::Invalid(v))
    }
}

/// Estimate with a one-sigma uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    /// `None` when the uncertainty is not available.
    pub sigma: Option<f64>,
}

/// Outcome of a nonlinear fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimates: Vec<ParamEstimate>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub photon_number: Option<f64>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn new(
        estimates: Vec<ParamEstimate>,
        residual_norm: f64,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let mut warnings = Vec::new();
        if !converged {
            warnings.push("fit did not converge; estimates are unreliable".to_string());
        }
        Self {
            estimates: estimates
                .into_iter()
                .map(|mut e| {
                    e.sigma = e.sigma.filter(|s| s.is_finite() && *s >= 0.0);
                    e
                })
                .collect(),
            residual_norm,
            iterations,
            converged,
            photon_number: None,
            warnings,
        }
    }

    pub fn get(&self, name: &str) -> Option<&ParamEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|e| e.value)
    }
}

fn violation(field: &str, constraint: &str) -> Violation {
    Violation {
        field: field.to_string(),
        constraint: constraint.to_string(),
    }
}

fn positive(v: &mut Vec<Violation>, field: &str, x: f64) {
    if !(x.is_finite() && x > 0.0) {
        v.push(violation(field, "must be positive"));
    }
}
