//! Gradient-based power flow.
//!
//! One iteration is a forward pass (mismatch and loss), a backward pass
//! (`Jᵀ·F` through [`PfWorkspace::backward`]), an optimizer step on the
//! packed `[θ(pv∪pq); |V|(pq)]` vector and a scheduler step on the loss.
//! The same engine drives single problems and block-diagonal batches; a
//! single problem is a batch of one case.

use super::{DpfConfig, Solution, SolverError, DIVERGENCE_LOSS};
use crate::grid::PowerFlowProblem;
use crate::optim::{optimizer_step, scheduler_step, OptimError, OptimizerState, SchedulerState};
use crate::pf::{Mismatch, NetworkView, PfWorkspace, VoltageState};
use std::ops::Range;
use std::time::Instant;

/// Solves one problem from `init` (projected onto the setpoints) or from a
/// flat start.
pub fn solve_dpf(
    problem: &PowerFlowProblem,
    config: &DpfConfig,
    init: Option<&VoltageState>,
) -> Result<Solution, SolverError> {
    let net = problem.view();
    let start = prepare_init(&net, init)?;
    let mut out = run(&net, std::slice::from_ref(&(0..net.n_buses())), config, start)?;
    Ok(out.pop().expect("one case in, one solution out"))
}

pub(super) fn prepare_init(net: &NetworkView, init: Option<&VoltageState>) -> Result<VoltageState, SolverError> {
    let mut state = match init {
        Some(s) => {
            if s.vm.len() != net.n_buses() || s.va.len() != net.n_buses() {
                return Err(crate::pf::PfError::DimensionMismatch {
                    expected: net.n_buses(),
                    got: s.vm.len(),
                }
                .into());
            }
            s.clone()
        }
        None => VoltageState::flat(net),
    };
    state.project(net);
    Ok(state)
}

struct CaseTrack {
    buses: Range<usize>,
    n_components: usize,
    converged: bool,
    iterations: usize,
    sse: f64,
    max_abs: f64,
    history: Vec<f64>,
    mismatch_history: Vec<f64>,
}

impl CaseTrack {
    fn loss(&self) -> f64 {
        if self.n_components == 0 {
            0.0
        } else {
            self.sse / self.n_components as f64
        }
    }
}

/// Runs the optimization over `net`, whose buses are partitioned into the
/// contiguous `cases`. Convergence is judged per case; converged cases are
/// frozen while the rest continue.
pub(super) fn run(
    net: &NetworkView,
    cases: &[Range<usize>],
    config: &DpfConfig,
    mut state: VoltageState,
) -> Result<Vec<Solution>, SolverError> {
    config.validate()?;
    let started = Instant::now();
    let n = net.n_buses();
    let n_params = net.n_params();
    let n_angles = net.pv.len() + net.pq.len();

    let case_of_bus = |bus: usize| -> u32 {
        cases.partition_point(|r| r.end <= bus) as u32
    };
    // Parameter k and mismatch component k refer to the same bus.
    let component_case: Vec<u32> = net
        .pvpq()
        .chain(net.pq.iter().copied())
        .map(case_of_bus)
        .collect();

    let mut tracks: Vec<CaseTrack> = cases
        .iter()
        .map(|r| CaseTrack {
            buses: r.clone(),
            n_components: 0,
            converged: false,
            iterations: 0,
            sse: 0.0,
            max_abs: 0.0,
            history: Vec::new(),
            mismatch_history: Vec::new(),
        })
        .collect();
    for &c in &component_case {
        tracks[c as usize].n_components += 1;
    }
    let total_components = n_params;
    let grad_scale = if total_components == 0 {
        0.0
    } else {
        2.0 / total_components as f64
    };

    let mut ws = PfWorkspace::new(n);
    let mut mis = Mismatch::with_capacity(net);
    let mut params = state.pack(net);
    let mut last_good = params.clone();
    let mut grad = vec![0.0; n_params];
    let mut frozen = vec![false; n_params];
    let mut opt_state = OptimizerState::new(n_params);
    let mut sched_state = SchedulerState::new(config.optimizer.lr);
    let mut lr = config.optimizer.lr;
    let mut iteration = 0usize;

    loop {
        ws.forward(&state, net, &mut mis)?;
        for t in tracks.iter_mut() {
            t.sse = 0.0;
            t.max_abs = 0.0;
        }
        for (v, &c) in mis.dp.iter().chain(&mis.dq).zip(&component_case) {
            let t = &mut tracks[c as usize];
            t.sse += v * v;
            t.max_abs = t.max_abs.max(v.abs());
        }
        let total_sse: f64 = tracks.iter().map(|t| t.sse).sum();
        let loss = if total_components == 0 {
            0.0
        } else {
            total_sse / total_components as f64
        };
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            let mut last_state = state.clone();
            last_state.unpack(net, &last_good);
            return Err(SolverError::Divergence {
                iteration,
                loss,
                last_state: Box::new(last_state),
            });
        }
        last_good.copy_from_slice(&params);

        let mut newly_frozen = false;
        for t in tracks.iter_mut().filter(|t| !t.converged) {
            if config.record_history {
                t.history.push(t.loss());
                t.mismatch_history.push(t.max_abs);
            }
            if t.loss() < config.loss_tol || t.max_abs < config.mismatch_tol {
                t.converged = true;
                t.iterations = iteration;
                newly_frozen = true;
            }
        }
        if newly_frozen {
            for (f, &c) in frozen.iter_mut().zip(&component_case) {
                *f = tracks[c as usize].converged;
            }
        }
        if tracks.iter().all(|t| t.converged) || iteration >= config.max_iter || lr < config.early_stop_lr {
            break;
        }

        let (d_va, d_vm) = grad.split_at_mut(n_angles);
        ws.backward(&state, net, &mis, grad_scale, d_va, d_vm)?;
        for (g, &f) in grad.iter_mut().zip(&frozen) {
            if f {
                *g = 0.0;
            }
        }
        optimizer_step(&mut opt_state, &config.optimizer, &mut params, &grad, lr, Some(&frozen)).map_err(
            |e| match e {
                OptimError::NonFiniteGradient { .. } => SolverError::Divergence {
                    iteration,
                    loss: f64::NAN,
                    last_state: Box::new(state.clone()),
                },
                other => other.into(),
            },
        )?;
        state.unpack(net, &params);
        lr = scheduler_step(&mut sched_state, &config.scheduler, loss);
        iteration += 1;
    }

    let wall_time = started.elapsed();
    Ok(tracks
        .into_iter()
        .map(|t| {
            let buses = t.buses.clone();
            Solution {
                state: VoltageState {
                    vm: state.vm[buses.clone()].to_vec(),
                    va: state.va[buses].to_vec(),
                },
                converged: t.converged,
                iterations: if t.converged { t.iterations } else { iteration },
                final_loss: t.loss(),
                max_mismatch: t.max_abs,
                loss_history: t.history,
                mismatch_history: t.mismatch_history,
                wall_time,
            }
        })
        .collect())
}
