//! Deterministic synthetic measurements with embedded ground truth.
//!
//! Noise stream: ChaCha20 keyed with the 64-bit seed in little-endian order
//! followed by 24 zero bytes, block counter from zero. Uniform deviates are
//! `(next_u64 >> 11)·2⁻⁵³`; normal deviates use Box–Muller on
//! `u1 = 1 − uniform`, `u2 = uniform`, emitting `r·cos(2πu2)` then
//! `r·sin(2πu2)`. Noise is drawn real part first, point by point.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mattis_bardeen::{freq_shift_vs_temperature, MbSettings};
use crate::model::{ComplexTrace, HangerParams};
use crate::qp::{burst_closed_form, R_PRIME_MAX};
use crate::s21::{photon_number, s21_at, s21_at_detuning, Environment};

pub const TRUTH_SCHEMA: &str = "reskit-truth/1";

pub struct NoiseRng {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NoiseRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self { rng: ChaCha20Rng::from_seed(key), spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn complex(&mut self, sigma: f64) -> Complex64 {
        let re = self.gaussian();
        let im = self.gaussian();
        Complex64::new(sigma * re, sigma * im)
    }
}

/// Generating parameters, tagged by generator kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioKind {
    Trace {
        params: HangerParams,
        f_start: f64,
        f_stop: f64,
        n_points: usize,
        #[serde(default)]
        environment: Environment,
        #[serde(default)]
        power_in: Option<f64>,
    },
    PowerSweep {
        params: HangerParams,
        /// Hz per photon (negative for a downward shift).
        kerr: f64,
        /// Input powers at the chip, W.
        powers: Vec<f64>,
        n_points: usize,
        /// Half-span in linewidths around the shifted resonance.
        span_linewidths: f64,
    },
    Burst {
        params: HangerParams,
        alpha: f64,
        tau_ss: f64,
        x_i: f64,
        r_prime: f64,
        /// Sample interval, s.
        dt: f64,
        n_samples: usize,
        t_peak: f64,
        #[serde(default)]
        environment: Environment,
    },
    TempSweep {
        f_r0: f64,
        alpha: f64,
        t_c: f64,
        temps: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    /// Per-quadrature noise (Hz for temperature sweeps).
    pub sigma: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be non-negative"));
        }
        match &self.kind {
            ScenarioKind::Trace { params, f_start, f_stop, n_points, .. } => {
                params.validate()?;
                if !(f_stop > f_start && *f_start > 0.0) || *n_points < 2 {
                    return Err(Error::invalid("f_start", "must be positive and below f_stop with n_points >= 2"));
                }
            }
            ScenarioKind::PowerSweep { params, powers, n_points, span_linewidths, kerr } => {
                params.validate()?;
                if powers.is_empty() || powers.iter().any(|p| !(*p > 0.0)) {
                    return Err(Error::invalid("powers", "must be a non-empty list of positive values"));
                }
                if *n_points < 2 || !(*span_linewidths > 0.0) || !kerr.is_finite() {
                    return Err(Error::invalid("n_points", "span_linewidths and kerr must be valid"));
                }
            }
            ScenarioKind::Burst { params, alpha, tau_ss, x_i, r_prime, dt, n_samples, t_peak, .. } => {
                params.validate()?;
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid("alpha", "must lie in (0, 1]"));
                }
                if !(*tau_ss > 0.0 && *x_i > 0.0 && *dt > 0.0 && *t_peak >= 0.0) || *n_samples == 0 {
                    return Err(Error::invalid("tau_ss", "x_i, dt, n_samples must be positive"));
                }
                if !(*r_prime >= 0.0 && *r_prime <= R_PRIME_MAX) {
                    return Err(Error::invalid("r_prime", "must lie in [0, 1)"));
                }
            }
            ScenarioKind::TempSweep { f_r0, alpha, t_c, temps } => {
                if !(*f_r0 > 0.0 && *t_c > 0.0 && *alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid("f_r0", "t_c, alpha must be positive"));
                }
                if temps.iter().any(|t| !(*t >= 0.0 && t < t_c)) {
                    return Err(Error::invalid("temps", "must lie in [0, t_c)"));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ScenarioKind::Trace { .. } => "trace",
            ScenarioKind::PowerSweep { .. } => "power-sweep",
            ScenarioKind::Burst { .. } => "burst",
            ScenarioKind::TempSweep { .. } => "temp-sweep",
        }
    }

    /// Single frequency trace around a 6.04 GHz resonance.
    pub fn default_trace(seed: u64) -> Self {
        let params = HangerParams { f_r: 6.04e9, q_int: 1.78e6, q_c_mag: 1.30e6, phi: 0.1 };
        let half = 5.0 * params.linewidth();
        Self {
            kind: ScenarioKind::Trace {
                params,
                f_start: params.f_r - half,
                f_stop: params.f_r + half,
                n_points: 801,
                environment: Environment::default(),
                power_in: Some(1.75e-19),
            },
            sigma: 0.005,
            seed,
        }
    }

    pub fn default_power_sweep(seed: u64) -> Self {
        let params = HangerParams { f_r: 6.04e9, q_int: 1.78e6, q_c_mag: 1.30e6, phi: 0.1 };
        let powers = (0..9).map(|i| 1.75e-19 * 10f64.powf(0.5 * i as f64)).collect();
        Self {
            kind: ScenarioKind::PowerSweep { params, kerr: -2.15, powers, n_points: 401, span_linewidths: 5.0 },
            sigma: 0.002,
            seed,
        }
    }

    /// Burst with a 1.2 ms tail on a 4.60 GHz resonator.
    pub fn default_burst(seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Burst {
                params: HangerParams { f_r: 4.60e9, q_int: 5.2e5, q_c_mag: 4.0e3, phi: 0.0 },
                alpha: 0.96,
                tau_ss: 1.2e-3,
                x_i: 1e-4,
                r_prime: 0.9,
                dt: 20e-6,
                n_samples: 400,
                t_peak: 1e-3,
                environment: Environment::default(),
            },
            sigma: 1e-3,
            seed,
        }
    }

    pub fn default_temp_sweep(seed: u64) -> Self {
        Self {
            kind: ScenarioKind::TempSweep {
                f_r0: 4.60e9,
                alpha: 0.96,
                t_c: 2.15,
                temps: (0..12).map(|i| 0.3 + 0.1 * i as f64).collect(),
            },
            sigma: 1e3,
            seed,
        }
    }
}

/// Generator truth as flat `key = value` metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: String,
    pub seed: u64,
    pub sigma: f64,
    pub values: BTreeMap<String, f64>,
}

impl GroundTruth {
    pub fn to_meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("truth.schema".into(), TRUTH_SCHEMA.into());
        m.insert("truth.kind".into(), self.kind.clone());
        m.insert("truth.seed".into(), self.seed.to_string());
        m.insert("truth.sigma".into(), format!("{:?}", self.sigma));
        for (k, v) in &self.values {
            m.insert(format!("truth.{k}"), format!("{v:?}"));
        }
        m
    }

    pub fn from_meta(meta: &BTreeMap<String, String>) -> Result<Self> {
        match meta.get("truth.schema") {
            Some(s) if s == TRUTH_SCHEMA => {}
            Some(s) => return Err(Error::invalid("truth.schema", &format!("unsupported version {s}"))),
            None => return Err(Error::MissingKey("truth.schema".into())),
        }
        let kind = meta.get("truth.kind").ok_or_else(|| Error::MissingKey("truth.kind".into()))?.clone();
        let seed = meta
            .get("truth.seed")
            .ok_or_else(|| Error::MissingKey("truth.seed".into()))?
            .parse()
            .map_err(|_| Error::invalid("truth.seed", "must be an unsigned integer"))?;
        let num = |k: &str, v: &str| -> Result<f64> {
            v.trim().parse::<f64>().map_err(|_| Error::invalid(k, "must be a number"))
        };
        let sigma = num("truth.sigma", meta.get("truth.sigma").ok_or_else(|| Error::MissingKey("truth.sigma".into()))?)?;
        let mut values = BTreeMap::new();
        for (k, v) in meta {
            if let Some(name) = k.strip_prefix("truth.") {
                if !matches!(name, "schema" | "kind" | "seed" | "sigma") {
                    values.insert(name.to_string(), num(k, v)?);
                }
            }
        }
        Ok(Self { kind, seed, sigma, values })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

fn truth(s: &Scenario, pairs: &[(&str, f64)]) -> GroundTruth {
    GroundTruth {
        kind: s.kind_name().into(),
        seed: s.seed,
        sigma: s.sigma,
        values: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

fn hanger_pairs(p: &HangerParams) -> [(&'static str, f64); 4] {
    [("f_r", p.f_r), ("q_int", p.q_int), ("q_c_mag", p.q_c_mag), ("phi", p.phi)]
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn gen_trace(s: &Scenario) -> Result<ComplexTrace> {
    s.validate()?;
    let ScenarioKind::Trace { params, f_start, f_stop, n_points, environment, power_in } = &s.kind else {
        return Err(Error::invalid("kind", "must be trace"));
    };
    let freqs = linspace(*f_start, *f_stop, *n_points);
    let mut rng = NoiseRng::new(s.seed);
    let values = freqs
        .iter()
        .map(|&f| environment.factor(f) * s21_at(params, f) + rng.complex(s.sigma))
        .collect();
    let mut trace = ComplexTrace::frequency(freqs, values)?;
    trace.power_in = *power_in;
    let mut pairs = hanger_pairs(params).to_vec();
    pairs.extend([
        ("amplitude", environment.amplitude),
        ("env_phase", environment.phase),
        ("delay", environment.delay),
    ]);
    trace.meta = truth(s, &pairs).to_meta();
    Ok(trace)
}

/// One trace per power; the resonance moves by `kerr·n̄`.
pub fn gen_power_sweep(s: &Scenario) -> Result<Vec<ComplexTrace>> {
    s.validate()?;
    let ScenarioKind::PowerSweep { params, kerr, powers, n_points, span_linewidths } = &s.kind else {
        return Err(Error::invalid("kind", "must be power-sweep"));
    };
    let mut rng = NoiseRng::new(s.seed);
    powers
        .iter()
        .enumerate()
        .map(|(i, &pw)| {
            let n_bar = photon_number(params, pw)?;
            let shifted = HangerParams { f_r: params.f_r + kerr * n_bar, ..*params };
            let half = span_linewidths * shifted.linewidth();
            let freqs = linspace(shifted.f_r - half, shifted.f_r + half, *n_points);
            let values = freqs.iter().map(|&f| s21_at(&shifted, f) + rng.complex(s.sigma)).collect();
            let mut t = ComplexTrace::frequency(freqs, values)?;
            t.power_in = Some(pw);
            let mut pairs = hanger_pairs(params).to_vec();
            pairs.extend([("kerr", *kerr), ("n_bar", n_bar), ("f_shifted", shifted.f_r), ("index", i as f64)]);
            t.meta = truth(s, &pairs).to_meta();
            Ok(t)
        })
        .collect()
}

/// Excess density used by [`gen_burst`] at absolute time `t`.
pub fn burst_profile(t: f64, t_peak: f64, tau_ss: f64, x_i: f64, r_prime: f64) -> f64 {
    if t < t_peak {
        0.0
    } else {
        burst_closed_form(t - t_peak, tau_ss, x_i, r_prime)
    }
}

/// Zero-span trace at `f_r` of a burst with the closed-form recovery.
pub fn gen_burst(s: &Scenario) -> Result<ComplexTrace> {
    s.validate()?;
    let ScenarioKind::Burst { params, alpha, tau_ss, x_i, r_prime, dt, n_samples, t_peak, environment } = &s.kind
    else {
        return Err(Error::invalid("kind", "must be burst"));
    };
    let times: Vec<f64> = (0..*n_samples).map(|i| i as f64 * dt).collect();
    let env = environment.factor(params.f_r);
    let mut rng = NoiseRng::new(s.seed);
    let values = times
        .iter()
        .map(|&t| {
            let dx = burst_profile(t, *t_peak, *tau_ss, *x_i, *r_prime);
            env * s21_at_detuning(params, -0.25 * alpha * dx) + rng.complex(s.sigma)
        })
        .collect();
    let mut trace = ComplexTrace::time(times, values)?;
    let mut pairs = hanger_pairs(params).to_vec();
    pairs.extend([
        ("alpha", *alpha),
        ("tau_ss", *tau_ss),
        ("x_i", *x_i),
        ("r_prime", *r_prime),
        ("t_peak", *t_peak),
        ("amplitude", environment.amplitude),
        ("env_phase", environment.phase),
        ("delay", environment.delay),
    ]);
    trace.meta = truth(s, &pairs).to_meta();
    Ok(trace)
}

/// `(T, Δf)` pairs from the Mattis-Bardeen forward model plus noise in Hz.
pub fn gen_temp_sweep(s: &Scenario) -> Result<(Vec<(f64, f64)>, GroundTruth)> {
    s.validate()?;
    let ScenarioKind::TempSweep { f_r0, alpha, t_c, temps } = &s.kind else {
        return Err(Error::invalid("kind", "must be temp-sweep"));
    };
    let pts = freq_shift_vs_temperature(temps, *f_r0, *alpha, *t_c, &MbSettings::default())?;
    let mut rng = NoiseRng::new(s.seed);
    let out = pts.iter().map(|p| (p.t, p.delta_f + s.sigma * rng.gaussian())).collect();
    Ok((out, truth(s, &[("f_r0", *f_r0), ("alpha", *alpha), ("t_c", *t_c)])))
}
