#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_core::synth::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = Scenario::from_json(text);
});
