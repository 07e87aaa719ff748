#![no_main]

use feederlab::feeder_model::{merge_switches, parse_feeder, validate_topology, FeederTables};
use libfuzzer_sys::fuzz_target;

// Tables are separated by 0x1e in the order general, lines, configs,
// loads, coords, switches and an optional capacitors table.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut parts = text.split('\u{1e}').map(str::to_string);
    let mut next = || parts.next().unwrap_or_default();
    let tables = FeederTables {
        general: next(),
        lines: next(),
        configs: next(),
        loads: next(),
        coords: next(),
        switches: next(),
        capacitors: Some(next()).filter(|s| !s.is_empty()),
    };
    if let Ok(model) = parse_feeder(&tables) {
        let _ = validate_topology(&model);
        let _ = merge_switches(&model);
    }
});
