//! Adaptive Dormand-Prince 5(4) integration of scalar ODEs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-30,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `(grid[0], y0)` and returns `y` at every
/// grid point. Steps are clipped so each grid point is hit exactly.
pub fn integrate<F: Fn(f64, f64) -> f64>(f: F, y0: f64, grid: &[f64], s: &OdeSettings) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid", "must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0);
    let mut t = grid[0];
    let mut y = y0;
    let span = grid[grid.len() - 1] - grid[0];
    let mut h = if span > 0.0 { span * 1e-6 } else { 0.0 };
    let mut steps = 0;
    let mut k = [0.0; 7];

    for &target in &grid[1..] {
        while t < target {
            steps += 1;
            if steps > s.max_steps {
                return Err(Error::NonConvergence("ODE step budget exhausted".into()));
            }
            let last = t + h >= target;
            let hh = if last { target - t } else { h };
            for i in 0..7 {
                let mut yi = y;
                for j in 0..i {
                    yi += hh * A[i][j] * k[j];
                }
                k[i] = f(t + C[i] * hh, yi);
            }
            let y5 = y + hh * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
            let y4 = y + hh * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
            let sc = s.abs_tol + s.rel_tol * y.abs().max(y5.abs());
            let err = ((y5 - y4) / sc).abs();
            if !err.is_finite() {
                return Err(Error::Numerical("non-finite derivative in ODE".into()));
            }
            if err <= 1.0 {
                t = if last { target } else { t + hh };
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let next = hh * factor;
            // Keep the nominal step when a clipped final step succeeded.
            if !(last && err <= 1.0) {
                h = next;
            }
            if h < span * 1e-15 || h == 0.0 {
                return Err(Error::NonConvergence("ODE step size underflow".into()));
            }
        }
        out.push(y);
    }
    Ok(out)
}
