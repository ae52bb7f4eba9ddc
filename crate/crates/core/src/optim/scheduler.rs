use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Constant,
    StepLr,
    MultiStepLr,
    ReduceOnPlateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub kind: SchedulerKind,
    pub step_size: u64,
    pub gamma: f64,
    pub milestones: Vec<u64>,
    pub factor: f64,
    pub patience: u64,
    /// Relative improvement threshold (min mode).
    pub threshold: f64,
    pub cooldown: u64,
    pub min_lr: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self::constant()
    }
}

impl SchedulerConfig {
    pub fn constant() -> Self {
        Self {
            kind: SchedulerKind::Constant,
            step_size: 1,
            gamma: 1.0,
            milestones: Vec::new(),
            factor: 1.0,
            patience: 0,
            threshold: 0.0,
            cooldown: 0,
            min_lr: 0.0,
        }
    }

    pub fn step_lr(step_size: u64, gamma: f64) -> Self {
        Self {
            kind: SchedulerKind::StepLr,
            step_size,
            gamma,
            ..Self::constant()
        }
    }

    pub fn multi_step_lr(milestones: Vec<u64>, gamma: f64) -> Self {
        Self {
            kind: SchedulerKind::MultiStepLr,
            milestones,
            gamma,
            ..Self::constant()
        }
    }

    pub fn reduce_on_plateau(factor: f64, patience: u64, threshold: f64, cooldown: u64) -> Self {
        Self {
            kind: SchedulerKind::ReduceOnPlateau,
            factor,
            patience,
            threshold,
            cooldown,
            ..Self::constant()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub base_lr: f64,
    pub lr: f64,
    /// Number of `scheduler_step` calls so far.
    pub epoch: u64,
    pub best: f64,
    pub num_bad: u64,
    pub cooldown_left: u64,
}

impl SchedulerState {
    pub fn new(base_lr: f64) -> Self {
        Self {
            base_lr,
            lr: base_lr,
            epoch: 0,
            best: f64::INFINITY,
            num_bad: 0,
            cooldown_left: 0,
        }
    }
}

/// Advances the schedule by one evaluation and returns the learning rate to
/// use next. `metric` is only consulted by the plateau scheduler.
pub fn scheduler_step(state: &mut SchedulerState, config: &SchedulerConfig, metric: f64) -> f64 {
    state.epoch += 1;
    let t = state.epoch;
    match config.kind {
        SchedulerKind::Constant => {}
        SchedulerKind::StepLr => {
            let k = t / config.step_size.max(1);
            state.lr = state.base_lr * config.gamma.powi(k as i32);
        }
        SchedulerKind::MultiStepLr => {
            let passed = config.milestones.iter().filter(|&&m| m <= t).count();
            state.lr = state.base_lr * config.gamma.powi(passed as i32);
        }
        SchedulerKind::ReduceOnPlateau => {
            if metric < state.best * (1.0 - config.threshold) {
                state.best = metric;
                state.num_bad = 0;
            } else {
                state.num_bad += 1;
            }
            if state.cooldown_left > 0 {
                state.cooldown_left -= 1;
                state.num_bad = 0;
            }
            if state.num_bad > config.patience {
                state.lr = (state.lr * config.factor).max(config.min_lr);
                state.cooldown_left = config.cooldown;
                state.num_bad = 0;
            }
        }
    }
    state.lr
}
