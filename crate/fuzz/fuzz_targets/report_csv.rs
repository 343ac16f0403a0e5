#![no_main]

use libfuzzer_sys::fuzz_target;
use quantkit::eval::QuantReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = QuantReport::parse_csv(data) {
        let text = r.to_csv_string();
        let again = QuantReport::parse_csv(text.as_bytes()).expect("emitted report must parse");
        assert_eq!(again.len(), r.len());
        assert_eq!(again.to_csv_string(), text);
    }
});
