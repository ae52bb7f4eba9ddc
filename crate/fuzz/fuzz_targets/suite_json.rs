#![no_main]

use gridflux::bench::Suite;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(suite) = Suite::from_json(text) {
            assert!(suite.validate().is_ok());
        }
    }
});
