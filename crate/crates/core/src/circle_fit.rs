//! Quality-factor extraction from a complex frequency sweep.
//!
//! The pipeline runs in stages, each seeding the next:
//!
//! 1. cable delay: a common linear phase slope is fitted to the outer edges
//!    of the sweep; if it is significant, the delay is refined by minimizing
//!    the scatter of the data about its best-fit circle;
//! 2. an algebraic (Taubin) circle fit gives centre and radius;
//! 3. the angle about the centre is fitted with
//!    `θ(f) = θ0 − 2·atan(2·Q_L·(f/f_r − 1))`, giving `f_r` and `Q_L`;
//! 4. the off-resonant point `c − r·e^{iθ0}` fixes the environment
//!    (amplitude and phase), after which the normalized circle yields
//!    `|Q_c| = Q_L / (2r)` and `φ`;
//! 5. a Levenberg-Marquardt refinement of the full complex model supplies the
//!    final estimates and their covariance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, OMatrix, U3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexTrace, FitReport, HangerParams, ParamEstimate};
use crate::numeric::lm::{LeastSquares, LevenbergMarquardt};
use crate::numeric::roots::golden_min;
use crate::numeric::stats::{self, Histogram};
use crate::s21::{self, Environment};
use crate::synth::NoiseRng;

pub const MIN_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum DelayMode {
    /// Detect from the edge phase slope and fit only if significant.
    Auto,
    Off,
    /// Known delay in seconds; removed and held fixed.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub delay: DelayMode,
    /// Fraction of points on each edge used for the delay estimate.
    pub edge_fraction: f64,
    /// Significance (in sigmas) required before a delay is fitted.
    pub delay_significance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            delay: DelayMode::Auto,
            edge_fraction: 0.1,
            delay_significance: 3.0,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleGeometry {
    pub center: Complex64,
    pub radius: f64,
}

impl CircleGeometry {
    /// RMS of `|z − c| − r` over the points.
    pub fn rms_residual(&self, z: &[Complex64]) -> f64 {
        let s: f64 = z.iter().map(|p| ((p - self.center).norm() - self.radius).powi(2)).sum();
        (s / z.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFit {
    pub params: HangerParams,
    pub environment: Environment,
    /// Circle of the delay-corrected data in the measured frame.
    pub circle: CircleGeometry,
    /// Frequency span covered, in units of the loaded linewidth.
    pub linewidths_spanned: f64,
    pub report: FitReport,
}

/// Algebraic circle fit (Taubin), solved through an SVD without iteration.
pub fn fit_circle(points: &[Complex64]) -> Result<CircleGeometry> {
    if points.len() < 3 {
        return Err(Error::InsufficientData("circle fit needs at least three points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.re).sum::<f64>() / n;
    let my = points.iter().map(|p| p.im).sum::<f64>() / n;
    let xs: Vec<f64> = points.iter().map(|p| p.re - mx).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.im - my).collect();
    let zs: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x * x + y * y).collect();
    let zmean = zs.iter().sum::<f64>() / n;
    if !(zmean > 0.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = 2.0 * zmean.sqrt();
    let m: OMatrix<f64, nalgebra::Dyn, U3> =
        OMatrix::<f64, nalgebra::Dyn, U3>::from_fn(points.len(), |i, j| match j {
            0 => (zs[i] - zmean) / s,
            1 => xs[i],
            _ => ys[i],
        });
    // Smallest right singular vector via the 3x3 normal matrix keeps this O(N).
    let ata: Matrix3<f64> = m.transpose() * &m;
    let eig = ata.symmetric_eigen();
    let k = (0..3)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("three eigenvalues");
    let v = eig.eigenvectors.column(k);
    let a0 = v[0] / s;
    let a1 = v[1];
    let a2 = v[2];
    let a3 = -zmean * a0;
    if a0.abs() < f64::MIN_POSITIVE || !a0.is_finite() {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    let cx = -a1 / (2.0 * a0) + mx;
    let cy = -a2 / (2.0 * a0) + my;
    let radius = (a1 * a1 + a2 * a2 - 4.0 * a0 * a3).sqrt() / (2.0 * a0.abs());
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Degenerate("circle fit produced no finite radius".into()));
    }
    Ok(CircleGeometry { center: Complex64::new(cx, cy), radius })
}

fn wrap(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

fn unwrap(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let d = wrap(phases[i] - phases[i - 1]);
        phases[i] = phases[i - 1] + d;
    }
}

fn remove_delay(freqs: &[f64], z: &[Complex64], tau: f64) -> Vec<Complex64> {
    freqs
        .iter()
        .zip(z)
        .map(|(&f, &v)| v * Complex64::from_polar(1.0, 2.0 * PI * f * tau))
        .collect()
}

/// Common phase slope of the two sweep edges (separate offsets), returned as
/// `(delay, sigma)`.
fn edge_delay(freqs: &[f64], z: &[Complex64], fraction: f64) -> Option<(f64, f64)> {
    let n = freqs.len();
    let k = ((n as f64 * fraction).round() as usize).max(3);
    if 2 * k > n {
        return None;
    }
    let mut rows = Vec::new();
    for (range, edge) in [(0..k, 0.0), (n - k..n, 1.0)] {
        let mut ph: Vec<f64> = z[range.clone()].iter().map(|v| v.arg()).collect();
        unwrap(&mut ph);
        for (i, idx) in range.enumerate() {
            rows.push((freqs[idx], edge, ph[i]));
        }
    }
    // phase = a_left·[left] + a_right·[right] + slope·f, with f centred per edge.
    let mut centred = Vec::with_capacity(rows.len());
    for edge in [0.0, 1.0] {
        let sel: Vec<_> = rows.iter().filter(|r| r.1 == edge).collect();
        let fm = sel.iter().map(|r| r.0).sum::<f64>() / sel.len() as f64;
        let pm = sel.iter().map(|r| r.2).sum::<f64>() / sel.len() as f64;
        for r in sel {
            centred.push((r.0 - fm, r.2 - pm));
        }
    }
    let sxx: f64 = centred.iter().map(|c| c.0 * c.0).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = centred.iter().map(|c| c.0 * c.1).sum::<f64>() / sxx;
    let resid: f64 = centred.iter().map(|c| (c.1 - slope * c.0).powi(2)).sum();
    let dof = (centred.len() as f64 - 3.0).max(1.0);
    let sigma_slope = (resid / dof / sxx).sqrt();
    Some((-slope / (2.0 * PI), sigma_slope / (2.0 * PI)))
}

fn circle_scatter(freqs: &[f64], z: &[Complex64], tau: f64) -> f64 {
    let zc = remove_delay(freqs, z, tau);
    match fit_circle(&zc) {
        Ok(c) => c.rms_residual(&zc) / c.radius,
        Err(_) => f64::INFINITY,
    }
}

struct PhaseProblem<'a> {
    freqs: &'a [f64],
    theta: &'a [f64],
}

impl LeastSquares for PhaseProblem<'_> {
    fn n_params(&self) -> usize {
        3
    }
    fn n_residuals(&self) -> usize {
        self.freqs.len()
    }
    // p = [θ0, Q_L, f_r]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.freqs.len() {
            let model = p[0] - 2.0 * (2.0 * p[1] * (self.freqs[i] / p[2] - 1.0)).atan();
            out[i] = wrap(self.theta[i] - model);
        }
    }
}

/// Initial `(θ0, Q_L, f_r)` from the angle-vs-frequency curve.
fn phase_guess(freqs: &[f64], theta: &[f64]) -> (f64, f64, f64) {
    let n = freqs.len();
    let mid = 0.5 * (theta[0] + theta[n - 1]);
    let mut fr = freqs[n / 2];
    for i in 1..n {
        let (a, b) = (theta[i - 1] - mid, theta[i] - mid);
        if a.signum() != b.signum() {
            let t = a / (a - b);
            fr = freqs[i - 1] + t * (freqs[i] - freqs[i - 1]);
            break;
        }
    }
    // Half-power points sit at ±π/2 from the resonance angle.
    let crossing = |target: f64| -> Option<f64> {
        (1..n).find_map(|i| {
            let (a, b) = (theta[i - 1] - target, theta[i] - target);
            (a.signum() != b.signum()).then(|| freqs[i - 1] + a / (a - b) * (freqs[i] - freqs[i - 1]))
        })
    };
    let ql = match (crossing(mid + PI / 2.0), crossing(mid - PI / 2.0)) {
        (Some(a), Some(b)) if a != b => fr / (a - b).abs(),
        _ => {
            let span = freqs[n - 1] - freqs[0];
            let dtheta = (theta[n - 1] - theta[0]).abs().max(1e-3);
            // Steepest-slope estimate: |dθ/df| = 4·Q_L/f_r at resonance.
            (dtheta / span) * fr / 4.0
        }
    };
    (mid, ql.abs().max(1.0), fr)
}

/// Full complex model with environment; parameters
/// `[f_r, 1/Q_int, 1/|Q_c|, φ, amplitude, phase, (delay)]`.
struct ComplexProblem<'a> {
    freqs: &'a [f64],
    z: &'a [Complex64],
    weights: Vec<f64>,
    fit_delay: bool,
    fixed_delay: f64,
}

impl ComplexProblem<'_> {
    fn delay(&self, p: &[f64]) -> f64 {
        if self.fit_delay {
            p[6]
        } else {
            self.fixed_delay
        }
    }
}

impl LeastSquares for ComplexProblem<'_> {
    fn n_params(&self) -> usize {
        if self.fit_delay {
            7
        } else {
            6
        }
    }
    fn n_residuals(&self) -> usize {
        2 * self.freqs.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let tau = self.delay(p);
        let ql = 1.0 / (p[1] + p[2] * p[3].cos());
        let c = Complex64::from_polar(p[2], p[3]);
        for (i, (&f, &z)) in self.freqs.iter().zip(self.z).enumerate() {
            let x = f / p[0] - 1.0;
            let d = Complex64::new(1.0, 2.0 * ql * x);
            let s0 = Complex64::new(1.0, 0.0) - ql * c / d;
            let e = Complex64::from_polar(p[4], p[5] - 2.0 * PI * f * tau);
            let r = (e * s0 - z) * self.weights[i];
            out[2 * i] = r.re;
            out[2 * i + 1] = r.im;
        }
    }
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let tau = self.delay(p);
        let (sphi, cphi) = p[3].sin_cos();
        let ql = 1.0 / (p[1] + p[2] * cphi);
        let ql2 = ql * ql;
        let c = Complex64::from_polar(p[2], p[3]);
        let i1 = Complex64::new(0.0, 1.0);
        // (dQ_L, dc) per parameter index 1..=3
        let dql = [-ql2, -ql2 * cphi, ql2 * p[2] * sphi];
        let dc = [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, p[3]), i1 * c];
        for (i, &f) in self.freqs.iter().enumerate() {
            let w = self.weights[i];
            let x = f / p[0] - 1.0;
            let d = Complex64::new(1.0, 2.0 * ql * x);
            let g = ql * c / d;
            let s0 = Complex64::new(1.0, 0.0) - g;
            let e = Complex64::from_polar(p[4], p[5] - 2.0 * PI * f * tau);
            let model = e * s0;
            let mut put = |col: usize, v: Complex64| {
                jac[(2 * i, col)] = v.re * w;
                jac[(2 * i + 1, col)] = v.im * w;
            };
            // ∂g = (∂Q_L·c + Q_L·∂c)/D − g·(2i(∂Q_L·x + Q_L·∂x))/D
            let dx_dfr = -f / (p[0] * p[0]);
            let dg_fr = -g * (2.0 * i1 * ql * dx_dfr) / d;
            put(0, -e * dg_fr);
            for k in 0..3 {
                let dg = (dql[k] * c + ql * dc[k]) / d - g * (2.0 * i1 * dql[k] * x) / d;
                put(k + 1, -e * dg);
            }
            put(4, model / p[4]);
            put(5, i1 * model);
            if self.fit_delay {
                put(6, -2.0 * PI * f * i1 * model);
            }
        }
        true
    }
}

/// Extracts hanger parameters and uncertainties from a frequency-mode trace.
pub fn fit_trace(trace: &ComplexTrace, opts: &FitOptions) -> Result<TraceFit> {
    trace.validate()?;
    let freqs = trace
        .freqs()
        .ok_or_else(|| Error::invalid("trace", "must be a frequency sweep"))?;
    let z = &trace.values;
    if z.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "circle fit needs at least {MIN_POINTS} points, got {}",
            z.len()
        )));
    }
    let mut warnings = Vec::new();

    // Stage 1: cable delay.
    let (tau0, fit_delay) = match opts.delay {
        DelayMode::Off => (0.0, false),
        DelayMode::Fixed(t) => (t, false),
        DelayMode::Auto => match edge_delay(freqs, z, opts.edge_fraction) {
            Some((tau, sigma)) if tau.abs() > opts.delay_significance * sigma => {
                let bound = 3.0 * tau.abs();
                let best = golden_min(|t| circle_scatter(freqs, z, t), -bound, bound, bound * 1e-9);
                (best, true)
            }
            _ => (0.0, false),
        },
    };
    let zc = remove_delay(freqs, z, tau0);

    // Stage 2: circle.
    let circle = fit_circle(&zc)?;
    let scatter = circle.rms_residual(&zc);
    if circle.radius < 3.0 * scatter {
        return Err(Error::Degenerate(format!(
            "circle radius {:.3e} is below the noise floor ({:.3e} rms)",
            circle.radius, scatter
        )));
    }

    // Stage 3: angle about the centre.
    let mut theta: Vec<f64> = zc.iter().map(|v| (v - circle.center).arg()).collect();
    unwrap(&mut theta);
    let (t0, ql0, fr0) = phase_guess(freqs, &theta);
    let phase_fit = LevenbergMarquardt { max_iter: opts.max_iterations, ..Default::default() }
        .minimize(&PhaseProblem { freqs, theta: &theta }, &[t0, ql0, fr0]);
    let (theta0, ql_phase, fr_phase) = (phase_fit.params[0], phase_fit.params[1].abs(), phase_fit.params[2]);
    if !(ql_phase.is_finite() && fr_phase.is_finite() && fr_phase > 0.0) {
        return Err(Error::NonConvergence("phase fit diverged".into()));
    }

    // Stage 4: environment from the off-resonant point, then normalize.
    let off = circle.center - circle.radius * Complex64::from_polar(1.0, theta0);
    let amplitude = off.norm();
    if !(amplitude > 0.0) {
        return Err(Error::Degenerate("off-resonant point at the origin".into()));
    }
    let c_norm = circle.center / off;
    let diameter = 2.0 * circle.radius / amplitude;
    let phi0 = (Complex64::new(1.0, 0.0) - c_norm).arg();
    let qc0 = ql_phase / diameter;
    let qi_inv0 = 1.0 / ql_phase - phi0.cos() / qc0;
    let qi_inv0 = if qi_inv0 > 0.0 { qi_inv0 } else { 1e-3 / ql_phase };

    // Stage 5: complex refinement.
    let weights = match &trace.noise_sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; z.len()],
    };
    let prob = ComplexProblem { freqs, z, weights, fit_delay, fixed_delay: tau0 };
    let mut p0 = vec![fr_phase, qi_inv0, 1.0 / qc0, phi0, amplitude, off.arg()];
    let mut lower = vec![0.0, 0.0, 1e-300, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
    let mut upper = vec![f64::INFINITY; 6];
    if fit_delay {
        p0.push(tau0);
        lower.push(f64::NEG_INFINITY);
        upper.push(f64::INFINITY);
    }
    let lm = LevenbergMarquardt {
        max_iter: opts.max_iterations,
        scale_covariance: trace.noise_sigma.is_none(),
        ..Default::default()
    }
    .with_bounds(lower, upper);
    let out = lm.minimize(&prob, &p0);
    let p = &out.params;
    if p[1] <= 0.0 {
        return Err(Error::Unphysical("internal loss converged to zero or below".into()));
    }
    let phi = wrap(p[3]);
    let params = HangerParams::new(p[0], 1.0 / p[1], 1.0 / p[2], phi)?;
    let environment = Environment {
        amplitude: p[4],
        phase: wrap(p[5]),
        delay: if fit_delay { p[6] } else { tau0 },
    };

    let cov = out.covariance.clone();
    let var = |i: usize| cov.as_ref().map_or(f64::INFINITY, |c| c[(i, i)].max(0.0));
    let ql = params.q_loaded();
    // Q_L = 1/(a + b·cos φ): gradient w.r.t. (a, b, φ) = indices 1..=3.
    let grad = [-ql * ql, -ql * ql * phi.cos(), ql * ql * p[2] * phi.sin()];
    let var_ql = cov.as_ref().map_or(f64::INFINITY, |c| {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += grad[i] * grad[j] * c[(i + 1, j + 1)];
            }
        }
        v.max(0.0)
    });
    let est = |name: &str, value: f64, sigma: f64| ParamEstimate { name: name.into(), value, sigma: Some(sigma) };
    let mut estimates = vec![
        est("f_r", params.f_r, var(0).sqrt()),
        est("q_int", params.q_int, var(1).sqrt() / (p[1] * p[1])),
        est("q_c_mag", params.q_c_mag, var(2).sqrt() / (p[2] * p[2])),
        est("phi", phi, var(3).sqrt()),
        est("q_loaded", ql, var_ql.sqrt()),
        est("amplitude", environment.amplitude, var(4).sqrt()),
        est("env_phase", environment.phase, var(5).sqrt()),
    ];
    estimates.push(est("delay", environment.delay, if fit_delay { var(6).sqrt() } else { 0.0 }));

    let linewidths = (freqs[freqs.len() - 1] - freqs[0]) / params.linewidth();
    if linewidths < 1.0 {
        return Err(Error::InsufficientData(format!(
            "sweep spans only {linewidths:.2} linewidths"
        )));
    }
    if linewidths < 3.0 {
        warnings.push(format!("sweep spans only {linewidths:.2} linewidths (< 3)"));
    }
    let mut report = FitReport::new(estimates, out.residual_norm(), out.iterations, out.converged());
    report.warnings.extend(warnings);
    if let Some(pw) = trace.power_in {
        report.photon_number = Some(s21::photon_number(&params, pw)?);
    }
    Ok(TraceFit {
        params,
        environment,
        circle: CircleGeometry { center: circle.center, radius: circle.radius },
        linewidths_spanned: linewidths,
        report,
    })
}

/// Parametric-bootstrap uncertainties: the fitted model is re-noised with
/// the residual scatter and refitted `draws` times. Reported separately from
/// the LM covariance.
pub fn monte_carlo_uncertainty(
    trace: &ComplexTrace,
    fit: &TraceFit,
    opts: &FitOptions,
    draws: usize,
    seed: u64,
) -> Result<Vec<ParamEstimate>> {
    let freqs = trace
        .freqs()
        .ok_or_else(|| Error::invalid("trace", "must be a frequency sweep"))?;
    let model: Vec<Complex64> = freqs
        .iter()
        .map(|&f| fit.environment.factor(f) * s21::s21_at(&fit.params, f))
        .collect();
    let m = freqs.len() as f64;
    let sigma = fit.report.residual_norm / (2.0 * m).sqrt();
    let mut rng = NoiseRng::new(seed);
    let mut cols: [Vec<f64>; 4] = Default::default();
    for _ in 0..draws {
        let values = model
            .iter()
            .map(|v| v + Complex64::new(rng.gaussian() * sigma, rng.gaussian() * sigma))
            .collect();
        let mut t = trace.clone();
        t.values = values;
        if let Ok(f) = fit_trace(&t, opts) {
            cols[0].push(f.params.f_r);
            cols[1].push(f.params.q_int);
            cols[2].push(f.params.q_c_mag);
            cols[3].push(f.params.phi);
        }
    }
    if cols[0].len() < 2 {
        return Err(Error::NonConvergence("too few bootstrap fits succeeded".into()));
    }
    let names = ["f_r", "q_int", "q_c_mag", "phi"];
    Ok(names
        .iter()
        .zip(cols.iter())
        .map(|(n, c)| ParamEstimate { name: format!("mc_{n}"), value: stats::mean(c), sigma: Some(stats::std_dev(c)) })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub index: usize,
    pub params: Option<HangerParams>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub entries: Vec<StabilityEntry>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_q_int: f64,
    pub std_q_int: f64,
    /// `std / mean` of the internal quality factor.
    pub relative_spread: f64,
    pub histogram: Histogram,
}

/// Fits every trace and summarizes the spread of `Q_int`. Failed fits are
/// recorded in place and excluded from the statistics.
pub fn fit_stability(traces: &[ComplexTrace], opts: &FitOptions, bins: usize) -> Result<StabilityReport> {
    if traces.len() < 2 {
        return Err(Error::InsufficientData("stability analysis needs at least two traces".into()));
    }
    let entries: Vec<StabilityEntry> = traces
        .iter()
        .enumerate()
        .map(|(index, t)| match fit_trace(t, opts) {
            Ok(f) => StabilityEntry { index, params: Some(f.params), error: None },
            Err(e) => StabilityEntry { index, params: None, error: Some(e.to_string()) },
        })
        .collect();
    let q: Vec<f64> = entries.iter().filter_map(|e| e.params.map(|p| p.q_int)).collect();
    if q.is_empty() {
        return Err(Error::NonConvergence("every trace in the ensemble failed to fit".into()));
    }
    let mean_q_int = stats::mean(&q);
    let std_q_int = stats::std_dev(&q);
    Ok(StabilityReport {
        n_ok: q.len(),
        n_failed: entries.len() - q.len(),
        entries,
        mean_q_int,
        std_q_int,
        relative_spread: std_q_int / mean_q_int,
        histogram: stats::histogram(&q, bins),
    })
}
