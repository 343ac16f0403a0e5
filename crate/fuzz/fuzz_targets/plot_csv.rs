#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::plots::{parse_bias_csv, parse_diagonal_csv, parse_shift_csv};

fuzz_target!(|data: &[u8]| {
    let _ = parse_diagonal_csv(data);
    let _ = parse_shift_csv(data);
    let _ = parse_bias_csv(data);
});
