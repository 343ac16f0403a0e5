#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::cli::{parse_method_list, parse_method_spec};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(specs) = parse_method_list(s) {
        for spec in specs {
            let again = parse_method_spec(&spec.to_string()).expect("rendered spec must parse");
            assert_eq!(again, spec);
            let _ = spec.label();
        }
    }
});
