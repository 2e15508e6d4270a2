#![no_main]

use libfuzzer_sys::fuzz_target;
use pilotpol::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything accepted must survive a serialize/parse round trip.
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        let again = cfg.to_toml().expect("accepted config serializes");
        let back = ExperimentConfig::from_toml(&again).expect("serialized config parses");
        assert_eq!(back.to_toml().unwrap(), again);
    }
});
