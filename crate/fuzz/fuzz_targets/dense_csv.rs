#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::data::{parse_dense_csv, CsvOptions, LabelColumn};

fuzz_target!(|data: &[u8]| {
    let _ = parse_dense_csv(data, &CsvOptions::default());
    let named = CsvOptions {
        header: true,
        label_column: LabelColumn::Name("label".into()),
        categories: None,
    };
    let _ = parse_dense_csv(data, &named);
    let fixed = CsvOptions {
        header: false,
        label_column: LabelColumn::Index(0),
        categories: Some(vec!["0".into(), "1".into()]),
    };
    let _ = parse_dense_csv(data, &fixed);
});
