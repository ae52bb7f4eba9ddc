use super::OptimError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
    Rmsprop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// SGD momentum.
    pub momentum: f64,
    /// RMSprop smoothing constant.
    pub alpha: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3, 0.9, 0.999)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr,
            beta1,
            beta2,
            momentum: 0.0,
            alpha: 0.99,
            eps: 1e-8,
        }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            momentum,
            ..Self::adam(lr, 0.9, 0.999)
        }
    }

    pub fn rmsprop(lr: f64, alpha: f64) -> Self {
        Self {
            kind: OptimizerKind::Rmsprop,
            alpha,
            ..Self::adam(lr, 0.9, 0.999)
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(OptimError::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        if !(self.lr > 0.0) {
            return Err(OptimError::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        unit("beta1", self.beta1)?;
        unit("beta2", self.beta2)?;
        unit("alpha", self.alpha)?;
        if !(self.momentum >= 0.0) {
            return Err(OptimError::InvalidConfig("momentum must be non-negative".into()));
        }
        Ok(())
    }
}

/// Moment estimates for one run. Vectors are sized lazily on the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub buf: Vec<f64>,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        Self {
            step_count: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            buf: vec![0.0; n_params],
        }
    }
}

/// Applies one update at learning rate `lr`. Entries with `frozen[k]` set
/// are skipped entirely: neither the parameter nor its moment state moves.
pub fn optimizer_step(
    state: &mut OptimizerState,
    config: &OptimizerConfig,
    params: &mut [f64],
    grad: &[f64],
    lr: f64,
    frozen: Option<&[bool]>,
) -> Result<(), OptimError> {
    if params.len() != grad.len() {
        return Err(OptimError::LengthMismatch {
            params: params.len(),
            grad: grad.len(),
        });
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteGradient { index });
    }
    let n = params.len();
    if state.m.len() != n {
        *state = OptimizerState {
            step_count: state.step_count,
            ..OptimizerState::new(n)
        };
    }
    state.step_count += 1;
    let is_frozen = |k: usize| frozen.is_some_and(|f| f[k]);

    match config.kind {
        OptimizerKind::Adam => {
            let t = state.step_count as i32;
            let (b1, b2) = (config.beta1, config.beta2);
            let bias1 = 1.0 - b1.powi(t);
            let bias2 = 1.0 - b2.powi(t);
            for k in 0..n {
                if is_frozen(k) {
                    continue;
                }
                let g = grad[k];
                state.m[k] = b1 * state.m[k] + (1.0 - b1) * g;
                state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g;
                let m_hat = state.m[k] / bias1;
                let v_hat = state.v[k] / bias2;
                params[k] -= lr * m_hat / (v_hat.sqrt() + config.eps);
            }
        }
        OptimizerKind::Sgd => {
            let first = state.step_count == 1;
            for k in 0..n {
                if is_frozen(k) {
                    continue;
                }
                let mut d = grad[k];
                if config.momentum != 0.0 {
                    state.buf[k] = if first {
                        d
                    } else {
                        config.momentum * state.buf[k] + d
                    };
                    d = state.buf[k];
                }
                params[k] -= lr * d;
            }
        }
        OptimizerKind::Rmsprop => {
            let a = config.alpha;
            for k in 0..n {
                if is_frozen(k) {
                    continue;
                }
                let g = grad[k];
                state.v[k] = a * state.v[k] + (1.0 - a) * g * g;
                params[k] -= lr * g / (state.v[k].sqrt() + config.eps);
            }
        }
    }
    Ok(())
}
