#![no_main]

use libfuzzer_sys::fuzz_target;
use pilotpol::experiment::csv::{parse_csv, to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_csv(text) {
        let out = to_csv(&rows);
        let again = parse_csv(&out).expect("written CSV parses");
        assert_eq!(to_csv(&again), out);
    }
});
