#![no_main]

use libfuzzer_sys::fuzz_target;
use resonator_core::io::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = Config::parse(text) else { return };
    let emitted = cfg.emit();
    let again = Config::parse(&emitted).expect("emitted config parses");
    assert_eq!(again.emit(), emitted);
});
