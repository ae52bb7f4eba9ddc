//! Time series of injection scenarios on a fixed network and their
//! warm-started solution.

use crate::grid::PowerFlowProblem;
use crate::solvers::{solve_dpf, DpfConfig, Solution, SolverError};
use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("invalid series parameters: {0}")]
    InvalidParameters(String),
    #[error("step {step}: {source}")]
    Step { step: usize, source: SolverError },
}

/// Per-step specified injections over one network.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSeries {
    pub base: PowerFlowProblem,
    /// `s_bus` of every step, p.u.
    pub steps: Vec<Vec<Complex64>>,
    pub seed: u64,
}

impl InjectionSeries {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The problem of step `t`: the base network with that step's injections.
    pub fn problem(&self, t: usize) -> PowerFlowProblem {
        self.base.with_injections(self.steps[t].clone())
    }
}

/// Random-walk load series. Step 0 is the base case; at every later step each
/// bus load (P and Q together) is scaled by `1 + δ` with `δ` uniform on
/// `[−rel_amplitude, rel_amplitude]`, drawn per bus and step. Generation is
/// held fixed, so the slack absorbs the change.
pub fn generate_series(
    problem: &PowerFlowProblem,
    n_steps: usize,
    rel_amplitude: f64,
    seed: u64,
) -> Result<InjectionSeries, SeriesError> {
    if n_steps == 0 {
        return Err(SeriesError::InvalidParameters("at least one step is required".into()));
    }
    if !(0.0..1.0).contains(&rel_amplitude) {
        return Err(SeriesError::InvalidParameters(format!(
            "relative amplitude must lie in [0, 1), got {rel_amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = Uniform::new_inclusive(-rel_amplitude, rel_amplitude);
    let mut load = problem.s_load.clone();
    let mut steps = Vec::with_capacity(n_steps);
    steps.push(problem.s_bus.clone());
    for _ in 1..n_steps {
        for l in load.iter_mut() {
            *l *= 1.0 + delta.sample(&mut rng);
        }
        steps.push(problem.s_gen.iter().zip(&load).map(|(g, l)| g - l).collect());
    }
    Ok(InjectionSeries {
        base: problem.clone(),
        steps,
        seed,
    })
}

/// Solves step 0 from a flat start with `first`, then every later step with
/// `warm` starting from the previous step's solution.
pub fn solve_series(
    series: &InjectionSeries,
    first: &DpfConfig,
    warm: &DpfConfig,
) -> Result<Vec<Solution>, SeriesError> {
    let mut out: Vec<Solution> = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let problem = series.problem(t);
        let result = match out.last() {
            None => solve_dpf(&problem, first, None),
            Some(prev) => solve_dpf(&problem, warm, Some(&prev.state)),
        };
        out.push(result.map_err(|source| SeriesError::Step { step: t, source })?);
    }
    Ok(out)
}

/// Solves every step independently from a flat start.
pub fn solve_series_cold(series: &InjectionSeries, config: &DpfConfig) -> Result<Vec<Solution>, SeriesError> {
    (0..series.len())
        .map(|t| solve_dpf(&series.problem(t), config, None).map_err(|source| SeriesError::Step { step: t, source }))
        .collect()
}

/// Number of update steps after which `loss_history` first reaches `target`
/// (entry 0 is the initial state), or `None` if it never does.
pub fn iterations_to_reach(loss_history: &[f64], target: f64) -> Option<usize> {
    loss_history.iter().position(|&l| l <= target)
}
