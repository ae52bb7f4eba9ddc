#![no_main]

use gridflux::grid::{parse_matpower, write_matpower};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(case) = parse_matpower(text) {
        // Whatever parses must survive a trip through the normalised form.
        let again = parse_matpower(&write_matpower(&case)).expect("normalised form parses");
        assert_eq!(again.n_buses(), case.n_buses());
        assert_eq!(again.n_branches(), case.n_branches());
    }
});
