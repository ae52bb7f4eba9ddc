#![allow(dead_code)]

use gridflux::grid::{build_problem, parse_matpower, GridCase, PowerFlowProblem};
use gridflux::pf::VoltageState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn case_text(name: &str) -> String {
    let path = format!("{}/data/{name}.m", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn case(name: &str) -> GridCase {
    parse_matpower(&case_text(name)).expect("valid case")
}

pub fn problem(name: &str) -> PowerFlowProblem {
    build_problem(&case(name)).expect("valid problem")
}

/// Random state with vm in [0.9, 1.1] and va in [−0.3, 0.3], projected onto
/// the setpoints.
pub fn random_state(p: &PowerFlowProblem, rng: &mut ChaCha8Rng) -> VoltageState {
    let mut s = VoltageState {
        vm: (0..p.n_buses()).map(|_| rng.gen_range(0.9..1.1)).collect(),
        va: (0..p.n_buses()).map(|_| rng.gen_range(-0.3..0.3)).collect(),
    };
    s.project(&p.view());
    s
}
