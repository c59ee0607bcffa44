#![no_main]

use libfuzzer_sys::fuzz_target;
use mbinception::harness::{parse_config_text, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = parse_config_text(text) {
        if let Ok(cfg) = RunConfig::from_map(&map) {
            // A valid config resolves and hashes deterministically.
            assert_eq!(cfg.hash(), cfg.hash());
            assert!(!cfg.resolved().is_empty());
        }
    }
});
