#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::data::{parse_sparse, SparseOptions};

fuzz_target!(|data: &[u8]| {
    let _ = parse_sparse(data, &SparseOptions::default());
    let zero = SparseOptions {
        zero_based: true,
        categories: Some(vec!["-1".into(), "1".into()]),
        dim: Some(16),
    };
    let _ = parse_sparse(data, &zero);
});
