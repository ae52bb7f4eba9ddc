//! Power-flow solvers: gradient-based (DPF), Newton-Raphson and the DC
//! approximation, plus batching and result export.

mod batch;
mod dc;
mod dpf;
mod export;
mod nr;

pub use batch::{make_batch, solve_batch, BatchedProblem};
pub use dc::{dc_state, solve_dc};
pub use dpf::solve_dpf;
pub use export::{solution_csv, RunMetadata};
pub use nr::{solve_nr, solve_nr_from, NR_DEFAULT_MAX_ITER, NR_DEFAULT_TOL};

use crate::optim::{OptimError, OptimizerConfig, SchedulerConfig};
use crate::pf::{PfError, VoltageState};
use crate::sparse::SparseError;
use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

/// Loss above which a run is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("diverged at iteration {iteration} (loss {loss:e})")]
    Divergence {
        iteration: usize,
        loss: f64,
        /// Last state with a finite loss.
        last_state: Box<VoltageState>,
    },
    #[error("singular Jacobian at iteration {iteration}: {source}")]
    SingularJacobian { iteration: usize, source: SparseError },
    #[error("DC susceptance matrix is singular (disconnected network?): {0}")]
    SingularDc(SparseError),
    #[error("batch must contain at least one problem")]
    EmptyBatch,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pf(#[from] PfError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpfConfig {
    pub optimizer: OptimizerConfig,
    pub scheduler: SchedulerConfig,
    pub max_iter: usize,
    /// p.u.²
    pub loss_tol: f64,
    /// p.u., ∞-norm over the mismatch components
    pub mismatch_tol: f64,
    /// Stop once the scheduled learning rate drops below this value.
    pub early_stop_lr: f64,
    pub record_history: bool,
}

impl DpfConfig {
    pub fn new(optimizer: OptimizerConfig, scheduler: SchedulerConfig, max_iter: usize) -> Self {
        Self {
            optimizer,
            scheduler,
            max_iter,
            loss_tol: 1e-10,
            mismatch_tol: 1e-6,
            early_stop_lr: 0.0,
            record_history: true,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.optimizer.validate()?;
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.loss_tol >= 0.0 && self.mismatch_tol >= 0.0 && self.early_stop_lr >= 0.0) {
            return Err(SolverError::InvalidConfig("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of one power-flow solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub state: VoltageState,
    pub converged: bool,
    /// Update steps taken (optimizer steps for DPF, Newton steps for NR).
    pub iterations: usize,
    pub final_loss: f64,
    pub max_mismatch: f64,
    /// Loss at every evaluated state, starting with the initial one.
    pub loss_history: Vec<f64>,
    pub mismatch_history: Vec<f64>,
    pub wall_time: Duration,
}
