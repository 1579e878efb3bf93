#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_core::io::{parse_trace, write_trace};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(trace) = parse_trace(text) else { return };
    let mut buf = Vec::new();
    write_trace(&trace, &mut buf).unwrap();
    let again = parse_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(again.values.len(), trace.values.len());
});
