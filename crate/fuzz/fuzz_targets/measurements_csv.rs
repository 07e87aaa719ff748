#![no_main]

use feederlab::state_estimation::{parse_measurements_csv, write_measurements_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = parse_measurements_csv(text) {
        let again =
            parse_measurements_csv(&write_measurements_csv(&set)).expect("written file parses");
        assert_eq!(again.measurements, set.measurements);
    }
});
