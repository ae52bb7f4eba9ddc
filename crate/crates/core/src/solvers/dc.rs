use super::SolverError;
use crate::grid::PowerFlowProblem;
use crate::pf::VoltageState;
use crate::sparse::{dense_lu_solve, DenseRealMatrix};

/// DC approximation: magnitudes at their setpoints (1.0 at pq) and angles
/// from `B'·θ = P` over the non-slack buses, with `B'` built from branch
/// reactances only.
pub fn solve_dc(problem: &PowerFlowProblem) -> Result<VoltageState, SolverError> {
    let n = problem.n_buses();
    let slack = problem.slack;
    let reduced = |k: usize| if k < slack { k } else { k - 1 };
    let size = n - 1;

    let mut b = DenseRealMatrix::zeros(size, size);
    for &(f, t, x) in &problem.branch_reactance {
        if f == t {
            continue;
        }
        let susceptance = 1.0 / x;
        if f != slack {
            b[(reduced(f), reduced(f))] += susceptance;
        }
        if t != slack {
            b[(reduced(t), reduced(t))] += susceptance;
        }
        if f != slack && t != slack {
            b[(reduced(f), reduced(t))] -= susceptance;
            b[(reduced(t), reduced(f))] -= susceptance;
        }
    }
    let p: Vec<f64> = (0..n).filter(|&k| k != slack).map(|k| problem.s_bus[k].re).collect();
    let theta = if size == 0 {
        Vec::new()
    } else {
        dense_lu_solve(b, &p).map_err(SolverError::SingularDc)?
    };

    let mut va = vec![0.0; n];
    for (k, a) in (0..n).filter(|&k| k != slack).zip(theta) {
        va[k] = a;
    }
    va[slack] = problem.slack_angle;
    Ok(VoltageState {
        vm: problem.vm_setpoint.clone(),
        va,
    })
}

/// Alias kept for call sites that read better as "DC state of".
pub fn dc_state(problem: &PowerFlowProblem) -> Result<VoltageState, SolverError> {
    solve_dc(problem)
}
