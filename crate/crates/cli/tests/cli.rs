use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn reskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reskit"))
        .args(args)
        .env_remove("RESKIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = reskit(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn derived(v: &Value, device: usize, key: &str) -> f64 {
    v["devices"][device]["derived"][key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_byte_reproducible() {
    for kind in ["trace", "burst", "temp-sweep"] {
        let a = ok(&["simulate", kind, "--seed", "11"]).stdout;
        let b = ok(&["simulate", kind, "--seed", "11"]).stdout;
        let c = ok(&["simulate", kind, "--seed", "12"]).stdout;
        assert_eq!(a, b, "{kind}");
        assert_ne!(a, c, "{kind}");
    }
}

#[test]
fn power_sweep_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "power-sweep", "--seed", "4", "--out", s(&a)]);
    ok(&["simulate", "power-sweep", "--seed", "4", "--out", s(&b)]);
    for i in 0..9 {
        let name = format!("sweep_{i:03}.csv");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn fit_s21_recovers_generator_truth() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let plot = dir.path().join("plot.csv");
    ok(&["simulate", "trace", "--seed", "5", "--out", s(&trace)]);
    let out = ok(&["fit-s21", "--in", s(&trace), "--csv", s(&plot)]);
    let r = json(&out);
    assert_eq!(r["schema"], "reskit-report/1");
    assert!(derived(&r, 0, "rel_err_q_int").abs() < 0.02);
    assert!(derived(&r, 0, "rel_err_f_r").abs() < 1e-6);
    assert!((derived(&r, 0, "n_bar") - 1.0).abs() < 0.05);
    let csv = std::fs::read_to_string(plot).unwrap();
    assert!(csv.starts_with("freq_hz,re,im,model_re,model_im\n"));
    assert_eq!(csv.lines().count(), 802);
}

#[test]
fn pipeline_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    ok(&["simulate", "trace", "--seed", "8", "--out", s(&trace)]);
    let a = ok(&["fit-s21", "--in", s(&trace), "--mc-draws", "5", "--seed", "2"]).stdout;
    let b = ok(&["fit-s21", "--in", s(&trace), "--mc-draws", "5", "--seed", "2"]).stdout;
    assert_eq!(a, b);
}

#[test]
fn loss_budget_from_config() {
    let cfg = data("package.cfg");
    let r = json(&ok(&["--config", s(&cfg), "loss-budget"]));
    let total = derived(&r, 0, "total");
    assert!((total - 1.28e-8).abs() < 1e-12);
    assert!(r["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    let ah24 = r["devices"].as_array().unwrap().iter().position(|d| d["name"] == "AH24").unwrap();
    assert!((derived(&r, ah24, "q_res_inv") - 1.523e-7).abs() < 1e-10);
}

#[test]
fn loss_budget_csv_is_tidy() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    ok(&["--config", s(&data("package.cfg")), "--out", s(&dir.path().join("b.json")), "--csv", s(&csv), "loss-budget"]);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("device,quantity,value,sigma\n"));
    assert!(text.contains("package,seam,9.025e-9,"));
}

#[test]
fn kerr_from_flags() {
    let r = json(&ok(&[
        "kerr", "--kerr=-2.152 Hz", "--c-s", "90 fF", "--l-k", "10 nH", "--l-strip", "150 um", "--w-strip", "3 um",
        "--thickness", "91 nm",
    ]));
    assert!((derived(&r, 0, "e_c_over_h") / 215.2e6 - 1.0).abs() < 5e-3);
    assert!((derived(&r, 0, "n_jj") / 1e4 - 1.0).abs() < 1e-3);
}

#[test]
fn tc_fit_on_simulated_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("tc.csv");
    ok(&["simulate", "temp-sweep", "--sigma", "0", "--out", s(&table)]);
    let r = json(&ok(&["tc-fit", "--in", s(&table), "--f-r", "4.6 GHz", "--alpha", "0.96"]));
    assert!(derived(&r, 0, "rel_err_t_c").abs() < 1e-4);
}

#[test]
fn report_merges_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["--config", s(&data("package.cfg")), "--out", s(&a), "loss-budget"]);
    ok(&[
        "kerr", "--kerr=-2 Hz", "--c-s", "90 fF", "--l-k", "10 nH", "--l-strip", "150 um", "--w-strip", "3 um",
        "--thickness", "91 nm", "--out", s(&b),
    ]);
    let r = json(&ok(&["report", "--in", s(&a), s(&b)]));
    assert_eq!(r["devices"].as_array().unwrap().len(), 4);
    assert_eq!(r["provenance"]["inputs"].as_object().unwrap().len(), 2);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "freq_hz,re,im\n1,2\n").unwrap();
    assert_eq!(reskit(&["fit-s21", "--in", s(&bad)]).status.code(), Some(2));
    assert_eq!(reskit(&["fit-s21", "--in", "/does/not/exist.csv"]).status.code(), Some(2));
    assert_eq!(reskit(&["kerr", "--kerr", "2 pF"]).status.code(), Some(2));
    assert_eq!(reskit(&["no-such-command"]).status.code(), Some(2));
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "[device.A]\nc_s = 90 pH\n").unwrap();
    let out = reskit(&["--config", s(&cfg), "loss-budget"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("device.A.c_s"));
}

#[test]
fn failed_fit_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let mut text = String::from("freq_hz,re,im\n");
    for i in 0..100 {
        text.push_str(&format!("{},1,0\n", 6e9 + i as f64 * 1e3));
    }
    std::fs::write(&flat, text).unwrap();
    let out = reskit(&["fit-s21", "--in", s(&flat)]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_cleanly() {
    let out = reskit(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fit-s21"));
}
