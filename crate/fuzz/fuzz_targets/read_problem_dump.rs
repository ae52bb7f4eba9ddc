#![no_main]

use gridflux::grid::read_problem_dump;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = read_problem_dump(text);
    }
});
