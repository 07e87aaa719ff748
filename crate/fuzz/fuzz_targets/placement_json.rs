#![no_main]

use feederlab::pmu_placement::parse_placement_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = parse_placement_json(text) {
        let _ = file.placement();
        let _ = file.partition();
        let written = serde_json::to_string(&file).expect("placement file serializes");
        assert_eq!(
            parse_placement_json(&written).expect("written file parses"),
            file
        );
    }
});
