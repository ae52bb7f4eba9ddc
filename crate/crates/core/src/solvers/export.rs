use super::Solution;
use crate::grid::PowerFlowProblem;
use crate::pf::{calc_power, PfError};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Per-bus solution table: `bus_id,vm_pu,va_rad,p_calc_pu,q_calc_pu`.
pub fn solution_csv(problem: &PowerFlowProblem, solution: &Solution) -> Result<String, PfError> {
    let s = calc_power(&solution.state, &problem.y_bus)?;
    let mut out = String::from("bus_id,vm_pu,va_rad,p_calc_pu,q_calc_pu\n");
    for (k, id) in problem.bus_ids.iter().enumerate() {
        writeln!(
            out,
            "{},{:.12},{:.12},{:.12},{:.12}",
            id, solution.state.vm[k], solution.state.va[k], s[k].re, s[k].im
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Run summary written next to the solution table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: String,
    /// Echo of the solver configuration that produced the run.
    pub config: serde_json::Value,
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    pub max_mismatch: f64,
    pub wall_time_ms: f64,
    pub loss_history: Vec<f64>,
}

impl RunMetadata {
    pub fn new(method: &str, config: serde_json::Value, solution: &Solution) -> Self {
        Self {
            method: method.to_string(),
            config,
            converged: solution.converged,
            iterations: solution.iterations,
            final_loss: solution.final_loss,
            max_mismatch: solution.max_mismatch,
            wall_time_ms: solution.wall_time.as_secs_f64() * 1e3,
            loss_history: solution.loss_history.clone(),
        }
    }
}
