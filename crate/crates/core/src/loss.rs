//! Participation-ratio loss accounting and power-dependent loss fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::MU0;
use crate::error::{Error, Result, Violation};
use crate::numeric::lm::{LeastSquares, LevenbergMarquardt};

/// Loss factors of the sample package (surface, conductor, seam).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PackageLoss {
    pub gamma_ma: f64,
    pub p_ma: f64,
    pub gamma_cond: f64,
    pub p_cond: f64,
    /// Seam admittance per unit length, 1/(Ω·m).
    pub y_seam: f64,
    /// Inverse seam conductance, Ω·m.
    pub g_seam_inv: f64,
}

/// Inductor and contact loss cannot be separated from a single measurement;
/// the ledger stores their sum and, when known, a split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InductiveSplit {
    pub q_ind_inv: f64,
    pub q_contact_inv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossLedger {
    pub gamma_bulk: f64,
    pub p_bulk: f64,
    pub gamma_surf: f64,
    pub p_ma: f64,
    pub p_ms: f64,
    pub p_sa: f64,
    /// `1/Q_ind + 1/Q_contact`.
    pub q_ind_contact_inv: f64,
    pub split: Option<InductiveSplit>,
    pub package: PackageLoss,
}

impl LossLedger {
    pub fn p_surf(&self) -> f64 {
        self.p_ma + self.p_ms + self.p_sa
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let fields = [
            ("gamma_bulk", self.gamma_bulk),
            ("p_bulk", self.p_bulk),
            ("gamma_surf", self.gamma_surf),
            ("p_ma", self.p_ma),
            ("p_ms", self.p_ms),
            ("p_sa", self.p_sa),
            ("q_ind_contact_inv", self.q_ind_contact_inv),
            ("package.gamma_ma", self.package.gamma_ma),
            ("package.p_ma", self.package.p_ma),
            ("package.gamma_cond", self.package.gamma_cond),
            ("package.p_cond", self.package.p_cond),
            ("package.y_seam", self.package.y_seam),
            ("package.g_seam_inv", self.package.g_seam_inv),
        ];
        for (name, x) in fields {
            if !(x.is_finite() && x >= 0.0) {
                v.push(Violation { field: name.into(), constraint: "must be non-negative".into() });
            }
        }
        if let Some(s) = self.split {
            let sum = s.q_ind_inv + s.q_contact_inv;
            if !(s.q_ind_inv >= 0.0 && s.q_contact_inv >= 0.0)
                || (sum - self.q_ind_contact_inv).abs() > 1e-12 * sum.max(self.q_ind_contact_inv)
            {
                v.push(Violation {
                    field: "split".into(),
                    constraint: "must be non-negative and sum to q_ind_contact_inv".into(),
                });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalLoss {
    pub bulk: f64,
    pub surface: f64,
    pub inductive_and_contact: f64,
    pub total: f64,
}

impl InternalLoss {
    pub fn q_int(&self) -> f64 {
        1.0 / self.total
    }
}

/// `1/Q_int = p_bulk·Γ_bulk + p_surf·Γ_surf + 1/Q_ind + 1/Q_contact`.
pub fn total_internal_loss(ledger: &LossLedger) -> Result<InternalLoss> {
    ledger.validate()?;
    let bulk = ledger.p_bulk * ledger.gamma_bulk;
    let surface = ledger.p_surf() * ledger.gamma_surf;
    let inductive_and_contact = ledger.q_ind_contact_inv;
    Ok(InternalLoss { bulk, surface, inductive_and_contact, total: bulk + surface + inductive_and_contact })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualLoss {
    pub q_res_inv: f64,
    /// Set when the bulk loss exceeds the measured loss.
    pub negative: bool,
}

/// `1/Q_res = 1/Q_int − 1/Q_bulk`; negative values are flagged, not clamped.
pub fn residual_loss(q_int: f64, q_bulk: f64) -> Result<ResidualLoss> {
    if !(q_int > 0.0 && q_bulk > 0.0) {
        return Err(Error::invalid("q_int", "and q_bulk must be positive"));
    }
    let q_res_inv = 1.0 / q_int - 1.0 / q_bulk;
    Ok(ResidualLoss { q_res_inv, negative: q_res_inv < 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackageBudget {
    pub surface: f64,
    pub conductor: f64,
    pub seam: f64,
    pub total: f64,
}

impl PackageBudget {
    pub fn q_pkg(&self) -> f64 {
        1.0 / self.total
    }
}

/// `1/Q_pkg = p_MA·Γ_MA + p_cond·Γ_cond + y_seam/g_seam`.
pub fn package_loss(ledger: &LossLedger) -> Result<PackageBudget> {
    ledger.validate()?;
    let p = &ledger.package;
    let surface = p.p_ma * p.gamma_ma;
    let conductor = p.p_cond * p.gamma_cond;
    let seam = p.y_seam * p.g_seam_inv;
    Ok(PackageBudget { surface, conductor, seam, total: surface + conductor + seam })
}

/// Conductor loss factor `Γ = R_s / (µ0·ω·λ)`.
pub fn conductor_loss_factor(r_s: f64, penetration_depth: f64, f: f64) -> f64 {
    r_s / (MU0 * 2.0 * PI * f * penetration_depth)
}

/// Power-saturable loss model
/// `1/Q(n̄) = 1/Q0 + F·δ / sqrt(1 + (n̄/n_c)^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsModel {
    pub q0: f64,
    /// `p_surf·tanδ_TLS`.
    pub tls_loss: f64,
    pub n_c: f64,
    pub beta: f64,
}

impl TlsModel {
    pub fn inv_q(&self, n_bar: f64) -> f64 {
        1.0 / self.q0 + self.tls_loss / (1.0 + (n_bar / self.n_c).powf(self.beta)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsFitResult {
    pub model: TlsModel,
    /// One-sigma uncertainties of `(q0, tls_loss, n_c, beta)`.
    pub sigmas: [f64; 4],
    /// `Q_int` interpolated at `n̄ = 1`.
    pub single_photon_q: f64,
    /// Saturation amplitude indistinguishable from zero; only `Q0` reported.
    pub constant_only: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// `(n̄, 1/Q_int)` sample with optional one-sigma uncertainty on `1/Q_int`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub n_bar: f64,
    pub inv_q: f64,
    pub sigma: Option<f64>,
}

struct TlsProblem<'a> {
    pts: &'a [LossPoint],
    weights: Vec<f64>,
}

impl LeastSquares for TlsProblem<'_> {
    fn n_params(&self) -> usize {
        4
    }
    fn n_residuals(&self) -> usize {
        self.pts.len()
    }
    // p = [1/Q0, F·δ, ln n_c, β]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let nc = p[2].exp();
        for (i, pt) in self.pts.iter().enumerate() {
            let m = p[0] + p[1] / (1.0 + (pt.n_bar / nc).powf(p[3])).sqrt();
            out[i] = (m - pt.inv_q) * self.weights[i];
        }
    }
}

/// Fits the saturation model. Used as an interpolator for the single-photon
/// quality factor.
pub fn tls_fit(points: &[LossPoint]) -> Result<TlsFitResult> {
    if points.len() < 5 {
        return Err(Error::InsufficientData("TLS fit needs at least five points".into()));
    }
    if points.iter().any(|p| !(p.n_bar > 0.0 && p.inv_q.is_finite() && p.inv_q > 0.0)) {
        return Err(Error::invalid("points", "need positive photon numbers and losses"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.n_bar.total_cmp(&b.n_bar));
    let (lo, hi) = (pts[0], pts[pts.len() - 1]);
    if hi.n_bar / lo.n_bar < 100.0 {
        return Err(Error::InsufficientData("photon numbers must span at least two decades".into()));
    }
    let weights: Vec<f64> = pts.iter().map(|p| 1.0 / p.sigma.unwrap_or(p.inv_q)).collect();
    let absolute = pts.iter().all(|p| p.sigma.is_some());

    let constant = |iterations| {
        let wsum: f64 = weights.iter().map(|w| w * w).sum();
        let mean = pts.iter().zip(&weights).map(|(p, w)| p.inv_q * w * w).sum::<f64>() / wsum;
        let q0 = 1.0 / mean;
        let sd = (pts.iter().map(|p| (p.inv_q - mean).powi(2)).sum::<f64>() / (pts.len() - 1) as f64
            / pts.len() as f64)
            .sqrt();
        TlsFitResult {
            model: TlsModel { q0, tls_loss: 0.0, n_c: f64::NAN, beta: f64::NAN },
            sigmas: [sd * q0 * q0, 0.0, f64::NAN, f64::NAN],
            single_photon_q: q0,
            constant_only: true,
            converged: true,
            iterations,
        }
    };

    let amp0 = lo.inv_q - hi.inv_q;
    if !(amp0 > 0.0) {
        return Ok(constant(0));
    }
    let p0 = [hi.inv_q, amp0, (lo.n_bar * hi.n_bar).sqrt().ln(), 1.0];
    let prob = TlsProblem { pts: &pts, weights: weights.clone() };
    let lm = LevenbergMarquardt { scale_covariance: !absolute, ..Default::default() }
        .with_bounds(vec![0.0, 0.0, f64::NEG_INFINITY, 0.05], vec![f64::INFINITY, f64::INFINITY, f64::INFINITY, 4.0]);
    let out = lm.minimize(&prob, &p0);
    let p = &out.params;
    let amp_sigma = out.sigma(1);
    if !(p[1] > 2.0 * amp_sigma) || !(p[0] > 0.0) {
        return Ok(constant(out.iterations));
    }
    let model = TlsModel { q0: 1.0 / p[0], tls_loss: p[1], n_c: p[2].exp(), beta: p[3] };
    let sigmas = [out.sigma(0) / (p[0] * p[0]), amp_sigma, model.n_c * out.sigma(2), out.sigma(3)];
    Ok(TlsFitResult {
        single_photon_q: 1.0 / model.inv_q(1.0),
        model,
        sigmas,
        constant_only: false,
        converged: out.converged(),
        iterations: out.iterations,
    })
}
