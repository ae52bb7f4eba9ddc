use super::dc::solve_dc;
use super::{Solution, SolverError, DIVERGENCE_LOSS};
use crate::grid::PowerFlowProblem;
use crate::pf::{assemble_jacobian, loss, Mismatch, PfWorkspace, VoltageState};
use crate::sparse::dense_lu_solve;
use std::time::Instant;

pub const NR_DEFAULT_TOL: f64 = 1e-8;
pub const NR_DEFAULT_MAX_ITER: usize = 20;

/// Newton-Raphson in polar coordinates, started from the DC solution.
pub fn solve_nr(problem: &PowerFlowProblem, tol: f64, max_iter: usize) -> Result<Solution, SolverError> {
    let init = solve_dc(problem)?;
    solve_nr_from(problem, &init, tol, max_iter)
}

/// Newton-Raphson from an explicit starting point (projected onto the
/// setpoints). Each step solves `J·Δx = −F` with dense LU.
pub fn solve_nr_from(
    problem: &PowerFlowProblem,
    init: &VoltageState,
    tol: f64,
    max_iter: usize,
) -> Result<Solution, SolverError> {
    if !(tol >= 0.0) {
        return Err(SolverError::InvalidConfig("tolerance must be non-negative".into()));
    }
    let started = Instant::now();
    let net = problem.view();
    if init.vm.len() != net.n_buses() || init.va.len() != net.n_buses() {
        return Err(crate::pf::PfError::DimensionMismatch {
            expected: net.n_buses(),
            got: init.vm.len(),
        }
        .into());
    }
    let mut state = init.clone();
    state.project(&net);
    let mut params = state.pack(&net);
    let mut ws = PfWorkspace::new(net.n_buses());
    let mut mis = Mismatch::with_capacity(&net);
    let mut loss_history = Vec::new();
    let mut mismatch_history = Vec::new();
    let mut iteration = 0;
    let mut last_good = state.clone();

    let converged = loop {
        ws.forward(&state, &net, &mut mis)?;
        let current = loss(&mis);
        if !current.is_finite() || current > DIVERGENCE_LOSS {
            return Err(SolverError::Divergence {
                iteration,
                loss: current,
                last_state: Box::new(last_good),
            });
        }
        last_good.clone_from(&state);
        let worst = mis.max_abs();
        loss_history.push(current);
        mismatch_history.push(worst);
        if worst < tol {
            break true;
        }
        if iteration >= max_iter {
            break false;
        }
        let jac = assemble_jacobian(&state, &net)?.assembled;
        let rhs: Vec<f64> = mis.stacked().iter().map(|f| -f).collect();
        let step = dense_lu_solve(jac, &rhs).map_err(|source| SolverError::SingularJacobian { iteration, source })?;
        for (p, d) in params.iter_mut().zip(&step) {
            *p += d;
        }
        state.unpack(&net, &params);
        iteration += 1;
    };

    Ok(Solution {
        converged,
        iterations: iteration,
        final_loss: *loss_history.last().expect("at least one evaluation"),
        max_mismatch: *mismatch_history.last().expect("at least one evaluation"),
        loss_history,
        mismatch_history,
        state,
        wall_time: started.elapsed(),
    })
}
