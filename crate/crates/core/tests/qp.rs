use proptest::prelude::*;

use resonator_core::qp::{
    burst_closed_form, fit_burst, integrate_qp_ode, rates_from_fit, shape_from_rates, steady_state_xqp, trace_to_xqp,
    BurstFitOptions,
};
use resonator_core::s21::Environment;
use resonator_core::synth::{burst_profile, gen_burst, NoiseRng, Scenario, ScenarioKind};
use resonator_core::HangerParams;

fn log_uniform(rng: &mut NoiseRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.uniform() * (hi / lo).ln()).exp()
}

#[test]
fn ode_matches_closed_form() {
    let mut rng = NoiseRng::new(2024);
    for _ in 0..100 {
        let r = log_uniform(&mut rng, 1e5, 1e9);
        let s = log_uniform(&mut rng, 10.0, 1e5);
        let x0 = log_uniform(&mut rng, 1e-8, 1e-4);
        let g = r * x0 * x0 + s * x0;
        let dx = log_uniform(&mut rng, 1e-7, 1e-3);
        let (tau, rp, x0_back) = shape_from_rates(r, s, g, dx);
        assert!((x0_back / x0 - 1.0).abs() < 1e-9);
        let grid: Vec<f64> = (0..=200).map(|i| 5.0 * tau * i as f64 / 200.0).collect();
        let num = integrate_qp_ode(r, s, g, x0 + dx, &grid).unwrap();
        for (t, x) in grid.iter().zip(&num) {
            let exact = x0_back + burst_closed_form(*t, tau, dx, rp);
            assert!((x / exact - 1.0).abs() < 1e-6, "r={r:e} s={s:e} x0={x0:e} dx={dx:e} t={t:e}");
        }
    }
}

#[test]
fn reference_rates_give_steady_decay_time() {
    let (r, s, x0) = (1.0 / 16e-9, 1.0 / 1.3e-3, 8e-7);
    let tau: f64 = 1.0 / (2.0 * r * x0 + s);
    assert!((tau / 1.15e-3 - 1.0).abs() < 0.01, "{tau:e}");
    assert!((tau / 1.2e-3 - 1.0).abs() < 0.10);
    let (tau2, _, _) = shape_from_rates(r, s, r * x0 * x0 + s * x0, 1e-4);
    assert!((tau2 / tau - 1.0).abs() < 1e-9);
    // The implied generation rate agrees with the quoted 6.5e-4 /s.
    assert!(((r * x0 * x0 + s * x0) / 6.5e-4 - 1.0).abs() < 0.02);
}

#[test]
fn steady_state_density_example() {
    let delta = 1.764 * 1.380649e-23 * 2.15;
    let x0 = steady_state_xqp(0.96, 5.88e5, 4.60e9, delta).unwrap();
    let hw = 1.054571817e-34 * 2.0 * std::f64::consts::PI * 4.60e9;
    let oracle = std::f64::consts::PI / (0.96 * 5.88e5) * (hw / (2.0 * delta)).sqrt();
    assert!((x0 / oracle - 1.0).abs() < 1e-3);
    assert!((x0 / 9.5e-7 - 1.0).abs() < 0.05, "{x0:e}");
}

fn burst(r_prime: f64, sigma: f64, seed: u64) -> Scenario {
    let mut s = Scenario::default_burst(seed);
    if let ScenarioKind::Burst { r_prime: rp, .. } = &mut s.kind {
        *rp = r_prime;
    }
    s.sigma = sigma;
    s
}

#[test]
fn noiseless_trace_round_trip() {
    let s = burst(0.9, 0.0, 0);
    let ScenarioKind::Burst { params, alpha, tau_ss, x_i, r_prime, t_peak, .. } = s.kind.clone() else { unreachable!() };
    let series = trace_to_xqp(&gen_burst(&s).unwrap(), &params, alpha, None).unwrap();
    assert!(series.dropped.is_empty());
    for (t, dx) in series.t.iter().zip(&series.dx) {
        assert!((dx - burst_profile(*t, t_peak, tau_ss, x_i, r_prime)).abs() < 1e-6);
    }
}

#[test]
fn environment_is_removed_before_conversion() {
    let mut s = burst(0.9, 0.0, 0);
    let env = Environment { amplitude: 0.3, phase: 1.2, delay: 4e-8 };
    if let ScenarioKind::Burst { environment, .. } = &mut s.kind {
        *environment = env;
    }
    let ScenarioKind::Burst { params, alpha, .. } = s.kind.clone() else { unreachable!() };
    let trace = gen_burst(&s).unwrap();
    let clean = trace_to_xqp(&gen_burst(&burst(0.9, 0.0, 0)).unwrap(), &params, alpha, None).unwrap();
    let series = trace_to_xqp(&trace, &params, alpha, Some(&env)).unwrap();
    for (a, b) in series.dx.iter().zip(&clean.dx) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn pure_exponential_tail_is_log_linear() {
    let s = burst(0.0, 0.0, 0);
    let ScenarioKind::Burst { params, alpha, tau_ss, t_peak, .. } = s.kind.clone() else { unreachable!() };
    let series = trace_to_xqp(&gen_burst(&s).unwrap(), &params, alpha, None).unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .t
        .iter()
        .zip(&series.dx)
        .filter(|(t, dx)| **t >= t_peak && **dx > 1e-7)
        .map(|(t, dx)| (*t, dx.ln()))
        .unzip();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope * tau_ss + 1.0).abs() < 0.01, "{slope:e}");
    let m = fit_burst(&series, &BurstFitOptions::default()).unwrap();
    assert!(m.r_prime < 1e-3, "{}", m.r_prime);
}

#[test]
fn recovered_rates_for_the_all_gral_impact() {
    let (r, s, x0) = (1.0 / 16e-9, 1.0 / 1.3e-3, 8e-7);
    let (tau, rp, _) = shape_from_rates(r, s, r * x0 * x0 + s * x0, 1e-4);
    let sc = Scenario {
        kind: ScenarioKind::Burst {
            params: HangerParams { f_r: 4.60e9, q_int: 5.2e5, q_c_mag: 4.0e3, phi: 0.0 },
            alpha: 0.96,
            tau_ss: tau,
            x_i: 1e-4,
            r_prime: rp,
            dt: 20e-6,
            n_samples: 400,
            t_peak: 1e-3,
            environment: Environment::default(),
        },
        sigma: 0.0,
        seed: 0,
    };
    let ScenarioKind::Burst { params, .. } = sc.kind.clone() else { unreachable!() };
    let series = trace_to_xqp(&gen_burst(&sc).unwrap(), &params, 0.96, None).unwrap();
    let m = fit_burst(&series, &BurstFitOptions::default()).unwrap();
    let q = rates_from_fit(m.tau_ss, m.x_i, m.r_prime, x0).unwrap();
    assert!((m.tau_ss / tau - 1.0).abs() < 1e-6);
    assert!((q.r / r - 1.0).abs() < 1e-4 && (q.s / s - 1.0).abs() < 1e-4, "{q:?}");
    assert!(q.consistency_residual < 1e-9);
}

proptest! {
    #[test]
    fn closed_form_is_strictly_decreasing(tau in 1e-5..1e-1f64, x_i in 1e-8..1e-2f64, rp in 0.0..0.999f64) {
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let v = burst_closed_form(i as f64 * 0.05 * tau, tau, x_i, rp);
            prop_assert!(v < prev && v > 0.0);
            prev = v;
        }
        prop_assert!(burst_closed_form(60.0 * tau, tau, x_i, rp) < 1e-25 * x_i);
    }
}
