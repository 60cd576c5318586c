#![no_main]

use libfuzzer_sys::fuzz_target;
use ringhold::io::{format_controller, parse_controller};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_controller(text) {
        let again = parse_controller(&format_controller(&file)).expect("formatted controller must reparse");
        assert_eq!(again.controller.k, file.controller.k);
    }
});
