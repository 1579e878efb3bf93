#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_core::io::units::{parse_quantity, Dimension};

const DIMS: [Dimension; 4] = [Dimension::Frequency, Dimension::Inductance, Dimension::Capacitance, Dimension::Length];

fuzz_target!(|data: &[u8]| {
    let Some((&sel, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let _ = parse_quantity("x", text, DIMS[sel as usize % DIMS.len()]);
});
