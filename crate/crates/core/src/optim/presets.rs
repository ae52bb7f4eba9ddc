use super::{OptimError, OptimizerConfig, SchedulerConfig};
use crate::solvers::DpfConfig;

pub const PRESET_NAMES: [&str; 4] = ["dpf-118", "dpf-9241", "ts-first", "ts-warm"];

/// Named hyperparameter sets.
///
/// * `dpf-118` / `dpf-9241`: static solves on the 118- and 9,241-bus grids.
/// * `ts-first` / `ts-warm`: first and subsequent steps of a time series.
pub fn preset(name: &str) -> Result<DpfConfig, OptimError> {
    let static_plateau = SchedulerConfig::reduce_on_plateau(0.547, 41, 0.0673, 97);
    let cfg = match name {
        "dpf-118" => DpfConfig::new(OptimizerConfig::adam(0.0034, 0.979, 0.963), static_plateau, 1000),
        "dpf-9241" => DpfConfig::new(OptimizerConfig::adam(0.0001, 0.979, 0.963), static_plateau, 1000),
        "ts-first" => DpfConfig::new(
            OptimizerConfig::adam(0.03564, 0.9802, 0.9440),
            SchedulerConfig::step_lr(100, 0.773),
            1000,
        ),
        "ts-warm" => DpfConfig::new(
            OptimizerConfig::adam(0.00027, 0.7847, 0.6624),
            SchedulerConfig::reduce_on_plateau(0.8, 2, 0.0388, 4),
            300,
        ),
        other => return Err(OptimError::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}
