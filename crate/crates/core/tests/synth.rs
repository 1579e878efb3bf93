use num_complex::Complex64;
use proptest::prelude::*;

use resonator_core::io::{parse_trace, write_trace};
use resonator_core::s21::s21_at;
use resonator_core::synth::{gen_burst, gen_power_sweep, gen_trace, GroundTruth, Scenario, ScenarioKind};
use resonator_core::HangerParams;

fn noise_std(seed: u64, sigma: f64) -> (f64, f64) {
    let mut s = Scenario::default_trace(seed);
    s.sigma = sigma;
    let noisy = gen_trace(&s).unwrap();
    s.sigma = 0.0;
    let clean = gen_trace(&s).unwrap();
    let d: Vec<Complex64> = noisy.values.iter().zip(&clean.values).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let sd = |f: &dyn Fn(&Complex64) -> f64| {
        let m = d.iter().map(f).sum::<f64>() / n;
        (d.iter().map(|z| (f(z) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (sd(&|z| z.re), sd(&|z| z.im))
}

#[test]
fn per_quadrature_noise_level() {
    let (mut var_re, mut var_im) = (0.0, 0.0);
    for seed in 0..100 {
        let (re, im) = noise_std(seed, 0.01);
        assert!((re / 0.01 - 1.0).abs() < 0.10 && (im / 0.01 - 1.0).abs() < 0.10, "seed {seed}: {re} {im}");
        var_re += re * re / 100.0;
        var_im += im * im / 100.0;
    }
    // Pooled over all seeds.
    assert!((var_re.sqrt() / 0.01 - 1.0).abs() < 0.05);
    assert!((var_im.sqrt() / 0.01 - 1.0).abs() < 0.05);
}

#[test]
fn embedded_truth_matches_generator() {
    let s = Scenario::default_trace(17);
    let ScenarioKind::Trace { params, .. } = &s.kind else { unreachable!() };
    let mut buf = Vec::new();
    write_trace(&gen_trace(&s).unwrap(), &mut buf).unwrap();
    let back = parse_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
    let truth = GroundTruth::from_meta(&back.meta).unwrap();
    assert_eq!(truth.kind, "trace");
    assert_eq!(truth.seed, 17);
    assert_eq!(truth.sigma, s.sigma);
    for (k, v) in [("f_r", params.f_r), ("q_int", params.q_int), ("q_c_mag", params.q_c_mag), ("phi", params.phi)] {
        assert_eq!(truth.get(k), Some(v), "{k}");
    }
}

#[test]
fn power_sweep_follows_kerr_shift() {
    let mut s = Scenario::default_power_sweep(3);
    s.sigma = 0.0;
    let ScenarioKind::PowerSweep { params, kerr, powers, .. } = s.kind.clone() else { unreachable!() };
    let traces = gen_power_sweep(&s).unwrap();
    assert_eq!(traces.len(), powers.len());
    for t in &traces {
        let truth = GroundTruth::from_meta(&t.meta).unwrap();
        let f_r = truth.get("f_shifted").unwrap();
        let n_bar = truth.get("n_bar").unwrap();
        assert!((f_r - (params.f_r + kerr * n_bar)).abs() < 1e-6);
        let shifted = HangerParams { f_r, ..params };
        let f = t.freqs().unwrap();
        let mid = f.len() / 2;
        assert!((t.values[mid] - s21_at(&shifted, f[mid])).norm() < 1e-12);
    }
}

#[test]
fn burst_truth_is_embedded() {
    let s = Scenario::default_burst(1);
    let t = gen_burst(&s).unwrap();
    let truth = GroundTruth::from_meta(&t.meta).unwrap();
    assert_eq!(truth.kind, "burst");
    assert_eq!(truth.get("tau_ss"), Some(1.2e-3));
    assert_eq!(truth.get("r_prime"), Some(0.9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn same_seed_same_bytes(seed in any::<u64>()) {
        let s = Scenario::default_trace(seed);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_trace(&gen_trace(&s).unwrap(), &mut a).unwrap();
        write_trace(&gen_trace(&s).unwrap(), &mut b).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scenario_json_round_trip(seed in any::<u64>(), sigma in 0.0..0.1f64) {
        for mut s in [Scenario::default_trace(seed), Scenario::default_burst(seed), Scenario::default_temp_sweep(seed), Scenario::default_power_sweep(seed)] {
            s.sigma = sigma;
            prop_assert_eq!(Scenario::from_json(&s.to_json().unwrap()).unwrap(), s);
        }
    }
}
