#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::cli::parse_param_flag;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((name, values)) = parse_param_flag(s) {
            assert!(!name.is_empty() && !values.is_empty());
        }
    }
});
