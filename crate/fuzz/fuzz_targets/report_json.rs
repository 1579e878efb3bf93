#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_core::io::ReportBundle;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ReportBundle::from_json(text);
});
