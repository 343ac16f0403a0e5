#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::cli::{parse_config, KEYS};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(layer) = parse_config(s) {
            assert!(layer.keys().all(|k| KEYS.contains(&k.as_str())));
        }
    }
});
