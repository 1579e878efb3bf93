//! Quasiparticle burst analysis.
//!
//! Zero-span traces are mapped to a frequency shift through the resonance
//! circle, then to excess quasiparticle density, and the recovery is fitted
//! with the closed-form solution of
//!
//! ```text
//! dx/dt = −r·x² − s·x + g
//! δx(t) = x_i·(1 − r′) / (e^{t/τ_ss} − r′)
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::model::{ComplexTrace, HangerParams};
use crate::numeric::lm::{LeastSquares, LevenbergMarquardt};
use crate::numeric::ode::{self, OdeSettings};
use crate::numeric::stats::{median, std_dev};
use crate::s21::{detuning_from_point, Environment};

/// Upper bound on `r′`; the closed form diverges at 1.
pub const R_PRIME_MAX: f64 = 1.0 - 1e-9;

/// `δf/f = −(α/4)·δx_qp`, inverted.
pub fn xqp_from_shift(frac_shift: f64, alpha: f64) -> f64 {
    -4.0 / alpha * frac_shift
}

/// Closed-form excess density at time `t` after the peak.
pub fn burst_closed_form(t: f64, tau_ss: f64, x_i: f64, r_prime: f64) -> f64 {
    x_i * (1.0 - r_prime) / ((t / tau_ss).exp() - r_prime)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XqpSeries {
    pub t: Vec<f64>,
    pub dx: Vec<f64>,
    /// Indices of samples dropped at the singular point.
    pub dropped: Vec<usize>,
}

/// Converts a zero-span trace taken at `params.f_r` to `δx_qp(t)`.
pub fn trace_to_xqp(
    trace: &ComplexTrace,
    params: &HangerParams,
    alpha: f64,
    env: Option<&Environment>,
) -> Result<XqpSeries> {
    let times = trace
        .times()
        .ok_or_else(|| Error::invalid("trace", "must be a time trace"))?;
    params.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1]"));
    }
    let mut out = XqpSeries { t: Vec::with_capacity(times.len()), dx: Vec::with_capacity(times.len()), dropped: Vec::new() };
    for (i, (&t, &z)) in times.iter().zip(&trace.values).enumerate() {
        let s: Complex64 = match env {
            Some(e) => e.remove(params.f_r, z),
            None => z,
        };
        match detuning_from_point(s, params) {
            Ok(x) => {
                out.t.push(t);
                out.dx.push(xqp_from_shift(x, alpha));
            }
            Err(Error::SingularPoint(_)) | Err(Error::Degenerate(_)) => out.dropped.push(i),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstFitOptions {
    /// Samples closer than this to the peak are excluded, s.
    pub mask: f64,
    /// Restricts the peak search to `[t0, t1]`.
    pub window: Option<(f64, f64)>,
    /// Subtract the median of the samples before the peak.
    pub subtract_baseline: bool,
}

impl Default for BurstFitOptions {
    fn default() -> Self {
        Self { mask: 50e-6, window: None, subtract_baseline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpBurstModel {
    pub tau_ss: f64,
    pub x_i: f64,
    pub r_prime: f64,
    pub tau_sigma: f64,
    pub x_i_sigma: f64,
    pub r_prime_sigma: f64,
    /// Time of the burst peak in the input series, s.
    pub t_peak: f64,
    pub baseline: f64,
    pub baseline_sigma: f64,
    pub n_points: usize,
    pub r_prime_at_bound: bool,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl QpBurstModel {
    pub fn eval(&self, t_since_peak: f64) -> f64 {
        burst_closed_form(t_since_peak, self.tau_ss, self.x_i, self.r_prime)
    }
}

struct BurstProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LeastSquares for BurstProblem<'_> {
    fn n_params(&self) -> usize {
        3
    }
    fn n_residuals(&self) -> usize {
        self.t.len()
    }
    // p = [τ, x_i, r′]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.t.len() {
            out[i] = burst_closed_form(self.t[i], p[0], p[1], p[2]) - self.y[i];
        }
    }
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let (tau, xi, rp) = (p[0], p[1], p[2]);
        for (i, &t) in self.t.iter().enumerate() {
            let u = t / tau;
            if u > 700.0 {
                jac[(i, 0)] = 0.0;
                jac[(i, 1)] = 0.0;
                jac[(i, 2)] = 0.0;
                continue;
            }
            let e = u.exp();
            let d = e - rp;
            jac[(i, 0)] = xi * (1.0 - rp) * e * t / (tau * tau * d * d);
            jac[(i, 1)] = (1.0 - rp) / d;
            jac[(i, 2)] = xi * (1.0 - e) / (d * d);
        }
        true
    }
}

/// Fits the recovery tail of a burst.
pub fn fit_burst(series: &XqpSeries, opts: &BurstFitOptions) -> Result<QpBurstModel> {
    let n = series.t.len();
    if n != series.dx.len() {
        return Err(Error::invalid("series", "time and density lengths differ"));
    }
    if series.dx.iter().chain(&series.t).any(|v| !v.is_finite()) {
        return Err(Error::invalid("series", "must be finite"));
    }
    let in_window = |t: f64| opts.window.is_none_or(|(a, b)| t >= a && t <= b);
    let peak = (0..n)
        .filter(|&i| in_window(series.t[i]))
        .max_by(|&a, &b| series.dx[a].abs().total_cmp(&series.dx[b].abs()))
        .ok_or_else(|| Error::InsufficientData("no samples inside the peak window".into()))?;
    let t_peak = series.t[peak];
    let (baseline, baseline_sigma) = if opts.subtract_baseline && peak >= 10 {
        let pre = &series.dx[..peak];
        // Standard error of a median under Gaussian noise.
        (median(pre), 1.2533 * std_dev(pre) / (pre.len() as f64).sqrt())
    } else {
        (0.0, 0.0)
    };

    let (t, y): (Vec<f64>, Vec<f64>) = (peak..n)
        .filter(|&i| series.t[i] - t_peak >= opts.mask)
        .map(|i| (series.t[i] - t_peak, series.dx[i] - baseline))
        .unzip();
    if t.len() < 50 {
        return Err(Error::InsufficientData(format!("{} tail points after masking; need 50", t.len())));
    }

    // Initial τ from a log-linear fit to the positive samples above 5% of the head.
    let head = y[..5.min(y.len())].iter().sum::<f64>() / 5.min(y.len()) as f64;
    if !(head > 0.0) {
        return Err(Error::Degenerate("burst tail has no positive excess density".into()));
    }
    let (lt, ly): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&y)
        .filter(|(_, &v)| v > 0.05 * head)
        .map(|(&a, &b)| (a, b.ln()))
        .unzip();
    let tau0 = match crate::numeric::stats::fit_line(&lt, &ly, None) {
        Ok(l) if l.slope < 0.0 => -1.0 / l.slope,
        _ => (t[t.len() - 1] - t[0]) / 3.0,
    };

    let prob = BurstProblem { t: &t, y: &y };
    let lm = LevenbergMarquardt::default()
        .with_bounds(vec![1e-12, 0.0, 0.0], vec![f64::INFINITY, f64::INFINITY, R_PRIME_MAX]);
    let mut best: Option<crate::numeric::lm::LmOutcome> = None;
    for rp0 in [0.0, 0.5, 0.9, 0.99] {
        // Match the model to the first tail sample at the starting r′.
        let t0 = t[0];
        let xi0 = head * ((t0 / tau0).exp() - rp0) / (1.0 - rp0);
        let out = lm.minimize(&prob, &[tau0, xi0, rp0]);
        if out.sum_sq.is_finite() && best.as_ref().is_none_or(|b| out.sum_sq < b.sum_sq) {
            best = Some(out);
        }
    }
    let out = best.ok_or_else(|| Error::NonConvergence("burst fit produced no finite solution".into()))?;
    let p = &out.params;
    let mut warnings = Vec::new();
    let r_prime_at_bound = p[2] >= R_PRIME_MAX * (1.0 - 1e-9) || (p[2] <= 0.0 && out.at_bound[2]);
    if r_prime_at_bound {
        warnings.push(format!("r_prime pinned at bound ({})", p[2]));
    }
    let span = t[t.len() - 1];
    if span < 3.0 * p[0] {
        warnings.push(format!("tail spans {:.2} decay times; 3 recommended", span / p[0]));
    }
    if !out.converged() {
        return Err(Error::NonConvergence(format!("burst fit stopped: {:?}", out.termination)));
    }
    // The baseline error is common to every tail sample; add its effect on
    // the parameters, `(JᵀJ)⁻¹Jᵀ·1·σ_b`, to the statistical variance.
    let mut jac = DMatrix::zeros(t.len(), 3);
    prob.jacobian(p, &mut jac);
    let shift = (jac.transpose() * &jac)
        .try_inverse()
        .map(|inv| inv * jac.transpose() * DMatrix::from_element(t.len(), 1, 1.0))
        .unwrap_or_else(|| DMatrix::zeros(3, 1));
    let sigma = |i: usize| out.sigma(i).hypot(shift[(i, 0)] * baseline_sigma);
    Ok(QpBurstModel {
        tau_ss: p[0],
        x_i: p[1],
        r_prime: p[2],
        tau_sigma: sigma(0),
        x_i_sigma: sigma(1),
        r_prime_sigma: sigma(2),
        t_peak,
        baseline,
        baseline_sigma,
        n_points: t.len(),
        r_prime_at_bound,
        converged: true,
        warnings,
    })
}

/// `x0 = (π/(α·Q_res))·sqrt(ħω/(2Δ))`.
pub fn steady_state_xqp(alpha: f64, q_res: f64, f_r: f64, delta: f64) -> Result<f64> {
    for (name, v) in [("alpha", alpha), ("q_res", q_res), ("f_r", f_r), ("delta", delta)] {
        if !(v > 0.0) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    let w = 2.0 * std::f64::consts::PI * f_r;
    Ok(std::f64::consts::PI / (alpha * q_res) * (HBAR * w / (2.0 * delta)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpRates {
    /// Recombination constant, 1/s.
    pub r: f64,
    /// Trapping rate, 1/s.
    pub s: f64,
    /// Generation rate, 1/s.
    pub g: f64,
    pub x0: f64,
    /// `|τ_ss·(2r·x0 + s) − 1|`.
    pub consistency_residual: f64,
    pub warnings: Vec<String>,
}

/// Physical rates from the fitted shape and an (upper-bound) steady state.
pub fn rates_from_fit(tau_ss: f64, x_i: f64, r_prime: f64, x0: f64) -> Result<QpRates> {
    if !(tau_ss > 0.0 && x_i > 0.0 && x0 >= 0.0) {
        return Err(Error::invalid("tau_ss", "x_i must be positive and x0 non-negative"));
    }
    if !(0.0..1.0).contains(&r_prime) {
        return Err(Error::invalid("r_prime", "must lie in [0, 1)"));
    }
    let q = r_prime / ((1.0 - r_prime) * x_i);
    let r = q / tau_ss;
    let s = (1.0 - 2.0 * q * x0) / tau_ss;
    let g = x0 / tau_ss * (1.0 - q * x0);
    let mut warnings = Vec::new();
    if s < 0.0 {
        warnings.push("negative trapping rate: outside model validity".into());
    }
    if g < 0.0 {
        warnings.push("negative generation rate: outside model validity".into());
    }
    Ok(QpRates { r, s, g, x0, consistency_residual: (tau_ss * (2.0 * r * x0 + s) - 1.0).abs(), warnings })
}

/// Forward parametrization: `τ_ss`, `r′` and `x0` from rates and an initial excess.
pub fn shape_from_rates(r: f64, s: f64, g: f64, dx_init: f64) -> (f64, f64, f64) {
    let x0 = if r > 0.0 { 2.0 * g / (s + (s * s + 4.0 * r * g).sqrt()) } else { g / s };
    let tau = 1.0 / (2.0 * r * x0 + s);
    let k = r * tau * dx_init;
    (tau, k / (1.0 + k), x0)
}

/// Numerical solution of the rate equation on `grid`, starting at `grid[0]`.
pub fn integrate_qp_ode(r: f64, s: f64, g: f64, x_init: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(r >= 0.0 && s >= 0.0 && g >= 0.0 && x_init >= 0.0) {
        return Err(Error::invalid("rates", "and x_init must be non-negative"));
    }
    ode::integrate(|_, x| -r * x * x - s * x + g, x_init, grid, &OdeSettings::default())
}
