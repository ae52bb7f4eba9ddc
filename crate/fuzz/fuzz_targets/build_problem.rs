#![no_main]

use gridflux::grid::{build_problem, parse_matpower};
use gridflux::pf::{mismatch, VoltageState};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(case) = parse_matpower(text) else { return };
    let Ok(problem) = build_problem(&case) else { return };
    let net = problem.view();
    let _ = mismatch(&VoltageState::flat(&net), &net);
});
