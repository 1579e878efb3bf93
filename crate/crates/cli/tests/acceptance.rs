//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use resonator_core::circle_fit::{fit_trace, FitOptions};
use resonator_core::inductance::characteristic_impedance;
use resonator_core::jja::{critical_current_density, kerr_from_njj, njj_from_kerr};
use resonator_core::loss::{package_loss, residual_loss, LossLedger, PackageLoss};
use resonator_core::mattis_bardeen::{complex_conductivity, fit_tc, MbSettings};
use resonator_core::model::{charging_energy, DeviceGeometry};
use resonator_core::numeric::stats::{median, percentile};
use resonator_core::qp::{
    burst_closed_form, fit_burst, integrate_qp_ode, rates_from_fit, shape_from_rates, trace_to_xqp, BurstFitOptions,
};
use resonator_core::s21::Environment;
use resonator_core::synth::{gen_burst, gen_temp_sweep, gen_trace, NoiseRng, Scenario, ScenarioKind};
use resonator_core::HangerParams;

const E: f64 = 1.602176634e-19;
const H: f64 = 6.62607015e-34;
const HBAR: f64 = H / (2.0 * PI);
const K_B: f64 = 1.380649e-23;
const PHI0: f64 = H / (2.0 * E);

type Check = Result<String, String>;

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn package_budget() -> Check {
    let ledger = LossLedger {
        package: PackageLoss {
            gamma_ma: 4.1e-2,
            p_ma: 5e-9,
            gamma_cond: 2.1e-3,
            p_cond: 1.7e-6,
            y_seam: 1.9e-6,
            g_seam_inv: 4.75e-3,
        },
        ..Default::default()
    };
    let b = package_loss(&ledger).map_err(|e| e.to_string())?;
    for (name, got, want) in [("surface", b.surface, 2e-10), ("conductor", b.conductor, 3.6e-9), ("seam", b.seam, 9e-9)] {
        ensure(rel(got, want) < 0.05, format!("{name} term {got:.3e}, expected {want:e}"))?;
    }
    let oracle = 1.0 / (4.1e-2 * 5e-9 + 2.1e-3 * 1.7e-6 + 1.9e-6 * 4.75e-3);
    ensure(rel(b.q_pkg(), oracle) < 1e-12, format!("Q_pkg {:e} vs arithmetic {oracle:e}", b.q_pkg()))?;
    ensure(rel(b.q_pkg(), 7.8e7) < 0.05, format!("Q_pkg {:.4e} not within 5% of 7.8e7", b.q_pkg()))?;
    Ok(format!(
        "terms ({:.2e}, {:.2e}, {:.3e}), Q_pkg = {:.4e}",
        b.surface,
        b.conductor,
        b.seam,
        b.q_pkg()
    ))
}

fn circle_fit_round_trip() -> Check {
    let truth = 1.78e6;
    let mut q = Vec::with_capacity(100);
    for seed in 0..100 {
        let mut s = Scenario::default_trace(seed);
        s.sigma = 0.01;
        let ScenarioKind::Trace { params, n_points, .. } = &mut s.kind else { unreachable!() };
        *params = HangerParams { f_r: 6.04e9, q_int: 1.78e6, q_c_mag: 1.30e6, phi: 0.1 };
        ensure(*n_points == 801, format!("{n_points} points"))?;
        let t = gen_trace(&s).map_err(|e| e.to_string())?;
        q.push(fit_trace(&t, &FitOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?.params.q_int);
    }
    let med = rel(median(&q), truth);
    let errs: Vec<f64> = q.iter().map(|&v| rel(v, truth)).collect();
    let p95 = percentile(&errs, 95.0);
    ensure(med < 0.02, format!("median off by {:.2}%", 100.0 * med))?;
    ensure(p95 < 0.08, format!("95th percentile error {:.2}%", 100.0 * p95))?;
    Ok(format!("median error {:.2}%, 95th percentile {:.2}%", 100.0 * med, 100.0 * p95))
}

fn kerr_chain() -> Check {
    let ec_hz = E * E / (2.0 * 90e-15) / H;
    let lib = charging_energy(90e-15) / H;
    ensure(rel(lib, ec_hz) < 1e-12, format!("E_c/h {lib:e} vs arithmetic {ec_hz:e}"))?;
    ensure(rel(lib, 215e6) < 0.005, format!("E_c/h = {lib:.4e} Hz"))?;
    let (n, a) = njj_from_kerr(2.152, 215.2e6 * H, 150e-6).map_err(|e| e.to_string())?;
    ensure(rel(n, 1e4) < 1e-9, format!("N_JJ = {n}"))?;
    ensure(rel(a, 15e-9) < 1e-9, format!("a_eff = {a:e}"))?;
    let mut k = Vec::new();
    for n in [4e3, 1e4, 3e4] {
        for c in [84e-15, 90e-15, 100e-15] {
            k.push(kerr_from_njj(n, charging_energy(c)));
        }
    }
    let (lo, hi) = (k.iter().cloned().fold(f64::INFINITY, f64::min), k.iter().cloned().fold(0.0, f64::max));
    ensure(lo >= 0.2 && hi <= 20.0, format!("|K| spans {lo:.3}..{hi:.3} Hz/photon"))?;
    Ok(format!("E_c/h = {:.2} MHz, N_JJ = {n:.0}, a_eff = {:.1} nm, |K| in {lo:.3}..{hi:.2} Hz", lib / 1e6, a * 1e9))
}

fn critical_current() -> Check {
    let g = DeviceGeometry { l_strip: 150e-6, w_strip: 3e-6, thickness: 91e-9 };
    let (l_j, i_c, j_c) = critical_current_density(10e-9, 1e4, &g).map_err(|e| e.to_string())?;
    let oracle = PHI0 / (2.0 * PI * (10e-9 / 1e4)) / (3e-6 * 91e-9);
    let per_cm2 = j_c * 1e-4;
    ensure(rel(j_c, oracle) < 0.01, format!("J_c {j_c:e} vs oracle {oracle:e}"))?;
    ensure(rel(per_cm2, 1.2e5) < 0.01, format!("J_c = {per_cm2:.4e} A/cm²"))?;
    ensure((1e5..=1e6).contains(&per_cm2), format!("J_c = {per_cm2:e} outside 1e5..1e6"))?;
    Ok(format!("L_J = {:.3} pH, I_c = {:.1} µA, J_c = {per_cm2:.4e} A/cm²", l_j * 1e12, i_c * 1e6))
}

fn qp_oracle() -> Check {
    let mut rng = NoiseRng::new(99);
    let log_u = |rng: &mut NoiseRng, lo: f64, hi: f64| (lo.ln() + rng.uniform() * (hi / lo).ln()).exp();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = log_u(&mut rng, 1e5, 1e9);
        let s = log_u(&mut rng, 10.0, 1e5);
        let x0 = log_u(&mut rng, 1e-8, 1e-4);
        let dx = log_u(&mut rng, 1e-7, 1e-3);
        let g = r * x0 * x0 + s * x0;
        let (tau, rp, x0) = shape_from_rates(r, s, g, dx);
        let grid: Vec<f64> = (0..=250).map(|i| 5.0 * tau * i as f64 / 250.0).collect();
        let num = integrate_qp_ode(r, s, g, x0 + dx, &grid).map_err(|e| e.to_string())?;
        for (t, x) in grid.iter().zip(&num) {
            worst = worst.max(rel(*x, x0 + burst_closed_form(*t, tau, dx, rp)));
        }
    }
    ensure(worst < 1e-6, format!("worst relative deviation {worst:e}"))?;
    let tau = 1.0 / (2.0 * (1.0 / 16e-9) * 8e-7 + 1.0 / 1.3e-3);
    ensure(rel(tau, 1.15e-3) < 0.005, format!("tau_ss = {tau:e}"))?;
    ensure(rel(tau, 1.2e-3) < 0.10, format!("tau_ss = {tau:e} not within 10% of 1.2 ms"))?;
    Ok(format!("max ODE/closed-form deviation {worst:.1e}, tau_ss = {:.3} ms", tau * 1e3))
}

fn qp_end_to_end() -> Check {
    let (r, s, x0) = (1.0 / 16e-9, 1.0 / 1.3e-3, 8e-7);
    let (tau, rp, _) = shape_from_rates(r, s, r * x0 * x0 + s * x0, 1e-4);
    let params = HangerParams { f_r: 4.60e9, q_int: 5.2e5, q_c_mag: 4.0e3, phi: 0.0 };
    let sigma = 3e-4;
    let mut ok = 0;
    let mut taus = Vec::new();
    for seed in 0..100 {
        let sc = Scenario {
            kind: ScenarioKind::Burst {
                params,
                alpha: 0.96,
                tau_ss: tau,
                x_i: 1e-4,
                r_prime: rp,
                dt: 20e-6,
                n_samples: 400,
                t_peak: 1e-3,
                environment: Environment::default(),
            },
            sigma,
            seed,
        };
        let trace = gen_burst(&sc).map_err(|e| e.to_string())?;
        let series = trace_to_xqp(&trace, &params, 0.96, None).map_err(|e| e.to_string())?;
        let Ok(m) = fit_burst(&series, &BurstFitOptions::default()) else { continue };
        let Ok(q) = rates_from_fit(m.tau_ss, m.x_i, m.r_prime, x0) else { continue };
        taus.push(m.tau_ss);
        if rel(m.tau_ss, tau) < 0.05 && rel(q.r, r) < 0.30 && rel(q.s, s) < 0.20 {
            ok += 1;
        }
    }
    ensure(ok >= 95, format!("{ok} of 100 runs within bounds at sigma = {sigma:e}"))?;
    Ok(format!(
        "{ok}/100 seeds within (5%, 30%, 20%) at sigma = {sigma:e}; median tau_ss = {:.4} ms (truth {:.4} ms)",
        median(&taus) * 1e3,
        tau * 1e3
    ))
}

fn mattis_bardeen() -> Check {
    let s = MbSettings::default();
    let d0 = 1.764 * K_B * 2.15;
    let mut worst: f64 = 0.0;
    for f in [2e9, 4.6e9, 8e9] {
        let c = complex_conductivity(0.0, f, 2.15, &s).map_err(|e| e.to_string())?;
        worst = worst.max(rel(c.sigma2, PI * d0 / (HBAR * 2.0 * PI * f)));
    }
    ensure(worst < 1e-3, format!("sigma2 limit off by {worst:e}"))?;
    let fit = |sigma: f64, seed: u64| -> Result<f64, String> {
        let mut sc = Scenario::default_temp_sweep(seed);
        sc.sigma = sigma;
        let (pts, _) = gen_temp_sweep(&sc).map_err(|e| e.to_string())?;
        Ok(fit_tc(&pts, 4.60e9, 0.96, false, &s).map_err(|e| e.to_string())?.t_c)
    };
    let clean = fit(0.0, 0)?;
    ensure(rel(clean, 2.15) < 0.01, format!("noiseless T_c = {clean}"))?;
    let mut noisy_worst: f64 = 0.0;
    for seed in 0..10 {
        noisy_worst = noisy_worst.max(rel(fit(1e3, seed)?, 2.15));
    }
    ensure(noisy_worst < 0.02, format!("1 kHz noise: worst T_c error {:.2}%", 100.0 * noisy_worst))?;
    Ok(format!(
        "sigma2 limit within {worst:.1e}; T_c = {clean:.5} K noiseless, worst {:.2}% over 10 seeds at 1 kHz",
        100.0 * noisy_worst
    ))
}

fn impedance() -> Check {
    let z = characteristic_impedance(320e-12, 2e-6, 6.6e-18 / 1e-6).map_err(|e| e.to_string())?;
    let oracle = (320e-12f64 / (2e-6 * 6.6e-12)).sqrt();
    ensure(rel(z, oracle) < 1e-12, format!("Z0 {z} vs arithmetic {oracle}"))?;
    ensure(rel(z, 4.92e3) < 0.01, format!("Z0 = {z:.1} Ohm"))?;
    Ok(format!("Z0 = {:.3} kOhm", z / 1e3))
}

fn residual_ledger() -> Check {
    let mut parts = Vec::new();
    for (name, q_int, q_bulk, want) in [("AH24", 2.67e6, 4.5e6, 1.52e-7), ("GH23", 4.72e6, 33e6, 1.82e-7)] {
        let got = residual_loss(q_int, q_bulk).map_err(|e| e.to_string())?.q_res_inv;
        let oracle = 1.0 / q_int - 1.0 / q_bulk;
        ensure(rel(got, oracle) < 1e-12, format!("{name}: {got:e} vs arithmetic {oracle:e}"))?;
        ensure(rel(got, want) < 0.02, format!("{name}: 1/Q_res = {got:.4e}"))?;
        parts.push(format!("{name} 1/Q_res = {got:.4e}"));
    }
    Ok(parts.join(", "))
}

fn reskit(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_reskit"))
        .args(args)
        .env_remove("RESKIT_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(out.stdout)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let twice = |args: &[&str]| -> Result<(), String> {
        let a = reskit(args)?;
        let b = reskit(args)?;
        ensure(a == b, format!("{args:?} differs between runs"))
    };
    let mut n = 0;
    for kind in ["trace", "burst", "temp-sweep"] {
        for seed in ["0", "7", "123456789"] {
            twice(&["simulate", kind, "--seed", seed])?;
            n += 1;
        }
    }
    for (i, seed) in ["0", "9"].iter().enumerate() {
        let (a, b) = (p(&format!("ps{i}a")), p(&format!("ps{i}b")));
        reskit(&["simulate", "power-sweep", "--seed", seed, "--out", &a])?;
        reskit(&["simulate", "power-sweep", "--seed", seed, "--out", &b])?;
        let mut files: Vec<_> = std::fs::read_dir(&a).map_err(|e| e.to_string())?.flatten().map(|e| e.file_name()).collect();
        files.sort();
        for f in &files {
            let x = std::fs::read(Path::new(&a).join(f)).map_err(|e| e.to_string())?;
            let y = std::fs::read(Path::new(&b).join(f)).map_err(|e| e.to_string())?;
            ensure(x == y, format!("power-sweep file {f:?} differs"))?;
        }
        n += 1;
    }

    let (trace, burst, temps, sweep) = (p("t.csv"), p("b.csv"), p("tc.csv"), p("sweep"));
    reskit(&["simulate", "trace", "--seed", "3", "--out", &trace])?;
    reskit(&["simulate", "burst", "--seed", "3", "--sigma", "3e-4", "--out", &burst])?;
    reskit(&["simulate", "temp-sweep", "--seed", "3", "--out", &temps])?;
    reskit(&["simulate", "power-sweep", "--seed", "3", "--out", &sweep])?;
    let mut sweep_files: Vec<String> = std::fs::read_dir(&sweep)
        .map_err(|e| e.to_string())?
        .flatten()
        .map(|e| e.path().to_string_lossy().into_owned())
        .collect();
    sweep_files.sort();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/package.cfg");
    let cfg = cfg.to_string_lossy();
    let wafer = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/wafer_ah24.cfg");
    let wafer = wafer.to_string_lossy();
    let mut power: Vec<&str> = vec!["power-sweep", "--in"];
    power.extend(sweep_files.iter().map(String::as_str));
    let pipelines: Vec<Vec<&str>> = vec![
        vec!["fit-s21", "--in", &trace, "--mc-draws", "10", "--seed", "4"],
        power,
        vec!["qp-burst", "--in", &burst, "--f-r", "4.6 GHz", "--q-int", "5.2e5", "--q-c", "4e3", "--alpha", "0.96", "--x0", "8e-7"],
        vec!["tc-fit", "--in", &temps, "--f-r", "4.6 GHz", "--alpha", "0.96"],
        vec!["--config", &cfg, "loss-budget"],
        vec!["--config", &wafer, "sheet-inductance"],
        vec!["kerr", "--kerr", "-2.152 Hz", "--c-s", "90 fF", "--l-k", "10 nH", "--l-strip", "150 um", "--w-strip", "3 um", "--thickness", "91 nm"],
    ];
    for args in &pipelines {
        twice(args)?;
    }
    Ok(format!("{n} simulate invocations and {} pipeline reports byte-identical across runs", pipelines.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Option<f64>); 10] = [
        ("package-loss reproduction", package_budget, Some(1.0)),
        ("circle-fit round trip", circle_fit_round_trip, Some(30.0)),
        ("Kerr/JJA chain", kerr_chain, Some(1.0)),
        ("critical-current chain", critical_current, Some(1.0)),
        ("QP oracle equivalence", qp_oracle, Some(60.0)),
        ("QP end-to-end", qp_end_to_end, Some(60.0)),
        ("Mattis-Bardeen limits and fit", mattis_bardeen, Some(120.0)),
        ("impedance check", impedance, Some(1.0)),
        ("residual-loss ledger", residual_ledger, Some(1.0)),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut res = f();
        let secs = start.elapsed().as_secs_f64();
        if let (Ok(_), Some(limit)) = (&res, budget) {
            if secs > *limit {
                res = Err(format!("took {secs:.2} s, budget {limit} s"));
            }
        }
        match res {
            Ok(msg) => println!("PASS criterion {}: {name}: {msg} ({secs:.2} s)", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {msg} ({secs:.2} s)", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
