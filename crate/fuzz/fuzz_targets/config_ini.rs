#![no_main]

use libfuzzer_sys::fuzz_target;
use ringhold::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        // The echo of an accepted config parses back to the same config.
        let again = RunConfig::parse(&cfg.echo()).expect("echo must reparse");
        assert_eq!(again.echo(), cfg.echo());
    }
});
