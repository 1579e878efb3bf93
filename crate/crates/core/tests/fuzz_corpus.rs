use std::fs;
use std::path::PathBuf;

use resonator_core::io::{parse_table, parse_trace, write_trace, Config, ReportBundle};
use resonator_core::synth::Scenario;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .flatten()
        .map(|e| e.path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn trace_seeds_parse_and_round_trip() {
    for (p, text) in seeds("trace_csv") {
        let t = parse_trace(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(parse_trace(std::str::from_utf8(&buf).unwrap()).unwrap().values, t.values);
    }
}

#[test]
fn config_seeds_parse() {
    for (p, text) in seeds("config") {
        let cfg = Config::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(Config::parse(&cfg.emit()).unwrap().emit(), cfg.emit());
    }
}

#[test]
fn table_seeds_parse() {
    for (p, text) in seeds("table_csv") {
        let rows = parse_table(&text, &["t_k", "delta_f_hz"]).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(rows.len() >= 2);
    }
}

#[test]
fn report_seeds_parse() {
    for (p, text) in seeds("report_json") {
        ReportBundle::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn scenario_seeds_parse() {
    for (p, text) in seeds("scenario_json") {
        Scenario::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
