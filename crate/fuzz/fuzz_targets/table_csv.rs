#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_core::io::parse_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_table(text, &["t_k", "delta_f_hz"]) {
        assert!(rows.iter().all(|r| r.len() == 2));
    }
});
