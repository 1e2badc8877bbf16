#![no_main]

use dragon_core::measure::parse_measure_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_measure_json(text) {
        if let Ok(spec) = m.to_spec() {
            assert!(spec.orders().all(|a| a > 0.0 && a <= 1.0));
        }
    }
});
