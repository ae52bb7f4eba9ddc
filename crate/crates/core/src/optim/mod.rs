//! First-order optimizers and learning-rate schedulers over a flat parameter
//! vector, plus the named hyperparameter presets.

mod optimizer;
mod presets;
mod scheduler;

pub use optimizer::{optimizer_step, OptimizerConfig, OptimizerKind, OptimizerState};
pub use presets::{preset, PRESET_NAMES};
pub use scheduler::{scheduler_step, SchedulerConfig, SchedulerKind, SchedulerState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("non-finite gradient entry at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("parameter vector has {params} entries, gradient has {grad}")]
    LengthMismatch { params: usize, grad: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}
