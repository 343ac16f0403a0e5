#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::PrevalenceVector;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = PrevalenceVector::from_field(s) {
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }
});
