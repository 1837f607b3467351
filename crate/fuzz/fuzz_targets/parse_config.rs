#![no_main]

use libfuzzer_sys::fuzz_target;

// The config parser must never panic on arbitrary input, and any document it
// accepts must serialize back to a document it parses to the same value.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = grantsim::parse_config(text) {
        let round_tripped = grantsim::parse_config(&grantsim::serialize_config(&cfg))
            .expect("serialized config must parse");
        assert_eq!(round_tripped, cfg);
    }
});
