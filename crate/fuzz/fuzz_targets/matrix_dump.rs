#![no_main]

use libfuzzer_sys::fuzz_target;
use ringhold::io::{format_matrix, parse_matrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix(text) {
        let again = parse_matrix(&format_matrix(&m)).expect("formatted matrix must reparse");
        assert_eq!(again.shape(), m.shape());
        for (a, b) in again.iter().zip(m.iter()) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }
});
