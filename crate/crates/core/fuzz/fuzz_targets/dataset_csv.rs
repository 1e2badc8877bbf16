#![no_main]

use dragon_core::io::{parse_dataset_csv, write_dataset_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = parse_dataset_csv(text) {
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        let again = parse_dataset_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again, d);
    }
});
