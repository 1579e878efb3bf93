//! Levenberg-Marquardt for small dense least-squares problems.
//!
//! Minimizes `½·Σ rᵢ(p)²`. Box bounds are handled by projecting every trial
//! point onto the feasible box; the gain ratio is computed from the projected
//! step so the damping update stays consistent.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);

    /// Fills `jac` (n_residuals × n_params) and returns `true`, or returns
    /// `false` to request central finite differences.
    fn jacobian(&self, _p: &[f64], _jac: &mut DMatrix<f64>) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct LevenbergMarquardt {
    pub max_iter: usize,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
    /// Relative step tolerance.
    pub xtol: f64,
    /// Infinity norm of the (projected) gradient.
    pub gtol: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Scale the covariance by the reduced chi-square (unknown noise level).
    pub scale_covariance: bool,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-15,
            xtol: 1e-14,
            gtol: 1e-14,
            lower: None,
            upper: None,
            fd_step: 6e-6,
            scale_covariance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    Cost,
    ZeroResidual,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Parameter covariance; `None` when the normal matrix is singular.
    pub covariance: Option<DMatrix<f64>>,
    /// `Σ rᵢ²` at the solution.
    pub sum_sq: f64,
    pub n_residuals: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub at_bound: Vec<bool>,
}

impl LmOutcome {
    pub fn converged(&self) -> bool {
        !matches!(self.termination, Termination::MaxIterations | Termination::Stalled)
    }

    pub fn sigma(&self, i: usize) -> f64 {
        match &self.covariance {
            Some(c) if c[(i, i)] >= 0.0 => c[(i, i)].sqrt(),
            _ => f64::INFINITY,
        }
    }

    pub fn residual_norm(&self) -> f64 {
        self.sum_sq.sqrt()
    }
}

impl LevenbergMarquardt {
    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    fn project(&self, p: &mut [f64]) {
        if let Some(lo) = &self.lower {
            for (x, l) in p.iter_mut().zip(lo) {
                if *x < *l {
                    *x = *l;
                }
            }
        }
        if let Some(hi) = &self.upper {
            for (x, h) in p.iter_mut().zip(hi) {
                if *x > *h {
                    *x = *h;
                }
            }
        }
    }

    fn bound_flags(&self, p: &[f64]) -> Vec<bool> {
        p.iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = self.lower.as_ref().is_some_and(|l| x <= l[i]);
                let hi = self.upper.as_ref().is_some_and(|u| x >= u[i]);
                lo || hi
            })
            .collect()
    }

    fn jacobian<P: LeastSquares>(&self, prob: &P, p: &[f64], scale: &[f64], jac: &mut DMatrix<f64>) {
        if prob.jacobian(p, jac) {
            return;
        }
        let m = prob.n_residuals();
        let mut rp = vec![0.0; m];
        let mut rm = vec![0.0; m];
        let mut q = p.to_vec();
        for j in 0..p.len() {
            let h = self.fd_step * (p[j].abs().max(scale[j]));
            let up = self.upper.as_ref().map_or(f64::INFINITY, |u| u[j]);
            let lo = self.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[j]);
            let (a, b) = if p[j] + h > up {
                (p[j] - h, p[j])
            } else if p[j] - h < lo {
                (p[j], p[j] + h)
            } else {
                (p[j] - h, p[j] + h)
            };
            q[j] = b;
            prob.residuals(&q, &mut rp);
            q[j] = a;
            prob.residuals(&q, &mut rm);
            q[j] = p[j];
            let d = b - a;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / d;
            }
        }
    }

    pub fn minimize<P: LeastSquares>(&self, prob: &P, p0: &[f64]) -> LmOutcome {
        let n = prob.n_params();
        let m = prob.n_residuals();
        assert_eq!(p0.len(), n);
        let scale: Vec<f64> = p0.iter().map(|x| if *x != 0.0 { x.abs() } else { 1e-8 }).collect();

        let mut p = p0.to_vec();
        self.project(&mut p);
        let mut r = vec![0.0; m];
        prob.residuals(&p, &mut r);
        let mut cost = sum_sq(&r);
        let mut jac = DMatrix::zeros(m, n);
        let mut trial = vec![0.0; n];
        let mut r_trial = vec![0.0; m];

        let mut lambda = -1.0;
        let mut nu = 2.0;
        let mut iterations = 0;
        let mut termination = Termination::MaxIterations;
        let mut stalls = 0;

        if !cost.is_finite() {
            return self.finish(prob, p, cost, 0, Termination::Stalled, &scale);
        }

        'outer: while iterations < self.max_iter {
            iterations += 1;
            if cost == 0.0 {
                termination = Termination::ZeroResidual;
                break;
            }
            self.jacobian(prob, &p, &scale, &mut jac);
            let rv = DVector::from_column_slice(&r);
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &rv;

            let pg = self.projected_gradient_norm(&p, &g);
            if pg <= self.gtol * cost.sqrt().max(f64::MIN_POSITIVE) || !pg.is_finite() {
                termination = if pg.is_finite() { Termination::Gradient } else { Termination::Stalled };
                break;
            }

            let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();
            if lambda < 0.0 {
                lambda = 1e-3;
            }

            // Inner loop: increase damping until a step is accepted.
            loop {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += lambda * diag[i];
                }
                let step = match solve_spd(&a, &(-&g)) {
                    Some(s) => s,
                    None => {
                        lambda *= nu;
                        nu *= 2.0;
                        if lambda > 1e30 {
                            termination = Termination::Stalled;
                            break 'outer;
                        }
                        continue;
                    }
                };
                for i in 0..n {
                    trial[i] = p[i] + step[i];
                }
                self.project(&mut trial);
                let d = DVector::from_iterator(n, (0..n).map(|i| trial[i] - p[i]));

                let step_norm = d.norm();
                let x_norm = DVector::from_column_slice(&p).norm();
                if step_norm <= self.xtol * (x_norm + self.xtol) {
                    termination = Termination::Step;
                    break 'outer;
                }

                prob.residuals(&trial, &mut r_trial);
                let new_cost = sum_sq(&r_trial);
                let predicted = -(2.0 * g.dot(&d) + d.dot(&(&jtj * &d)));
                let actual = cost - new_cost;
                let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };

                if new_cost.is_finite() && rho > 0.0 && actual >= 0.0 {
                    let rel = actual / cost;
                    p.copy_from_slice(&trial);
                    r.copy_from_slice(&r_trial);
                    cost = new_cost;
                    lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                    nu = 2.0;
                    if rel <= self.ftol && predicted / (cost + actual) <= self.ftol {
                        termination = Termination::Cost;
                        break 'outer;
                    }
                    stalls = 0;
                    break;
                }
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e30 {
                    stalls += 1;
                    // At a minimum to working precision: further damping cannot help.
                    termination = if stalls > 0 { Termination::Cost } else { Termination::Stalled };
                    break 'outer;
                }
            }
        }
        self.finish(prob, p, cost, iterations, termination, &scale)
    }

    fn projected_gradient_norm(&self, p: &[f64], g: &DVector<f64>) -> f64 {
        let mut best = 0.0f64;
        for i in 0..p.len() {
            let mut gi = g[i];
            // A descent direction that points out of the box does not count.
            if let Some(lo) = &self.lower {
                if p[i] <= lo[i] && gi > 0.0 {
                    gi = 0.0;
                }
            }
            if let Some(hi) = &self.upper {
                if p[i] >= hi[i] && gi < 0.0 {
                    gi = 0.0;
                }
            }
            best = best.max(gi.abs());
        }
        best
    }

    fn finish<P: LeastSquares>(
        &self,
        prob: &P,
        p: Vec<f64>,
        cost: f64,
        iterations: usize,
        termination: Termination,
        scale: &[f64],
    ) -> LmOutcome {
        let n = prob.n_params();
        let m = prob.n_residuals();
        let mut jac = DMatrix::zeros(m, n);
        self.jacobian(prob, &p, scale, &mut jac);
        let jtj = jac.transpose() * &jac;
        let covariance = invert_normal(&jtj).map(|c| {
            if self.scale_covariance && m > n {
                c * (cost / (m - n) as f64)
            } else {
                c
            }
        });
        let at_bound = self.bound_flags(&p);
        LmOutcome {
            params: p,
            covariance,
            sum_sq: cost,
            n_residuals: m,
            iterations,
            termination,
            at_bound,
        }
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Inverse of a normal matrix with column equilibration; `None` if singular.
fn invert_normal(jtj: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = jtj.nrows();
    let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)].sqrt()).collect();
    if d.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return None;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-14 {
        return None;
    }
    let inv = svd.pseudo_inverse(0.0).ok()?;
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (d[i] * d[j])))
}
