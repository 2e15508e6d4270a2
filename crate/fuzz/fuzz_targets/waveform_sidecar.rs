#![no_main]

use libfuzzer_sys::fuzz_target;
use pilotpol::waveform::{decode_samples, WaveformSidecar};

fuzz_target!(|data: &[u8]| {
    // Sidecar text, then an optional NUL and the raw sample payload.
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let (head, payload) = data.split_at(split);
    let Ok(text) = std::str::from_utf8(head) else {
        return;
    };
    if let Ok(sc) = WaveformSidecar::parse(text) {
        assert_eq!(WaveformSidecar::parse(&sc.to_text()).unwrap(), sc);
        let _ = decode_samples(payload.get(1..).unwrap_or_default(), &sc);
    }
});
