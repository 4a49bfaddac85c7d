//! SGD with (Nesterov) momentum and coupled L2 weight decay.
//!
//! For each coordinate, with `g' = g + weight_decay * θ`:
//!
//! ```text
//! v ← μ v + g'
//! θ ← θ - lr (g' + μ v)    (nesterov)
//! θ ← θ - lr v             (classical momentum)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
}

impl Default for OptimizerConfig {
    /// Momentum 0.9 with Nesterov and weight decay 1e-4.
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 1e-4,
            nesterov: true,
        }
    }
}

impl OptimizerConfig {
    pub fn plain() -> Self {
        Self {
            momentum: 0.0,
            weight_decay: 0.0,
            nesterov: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum buffer, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState {
    velocity: Vec<f64>,
}

impl VelocityState {
    pub fn zeros(len: usize) -> Self {
        Self {
            velocity: vec![0.0; len],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.velocity
    }

    pub fn len(&self) -> usize {
        self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocity.is_empty()
    }
}

/// Flat parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Applies one update to `params` and `state` in place.
///
/// Nothing is modified when an error is returned.
pub fn sgd_step(
    params: &mut ParameterVector,
    grads: &[f64],
    lr: f64,
    cfg: &OptimizerConfig,
    state: &mut VelocityState,
) -> Result<()> {
    if grads.len() != params.len() || state.len() != params.len() {
        return Err(Error::Contract(format!(
            "length mismatch: {} params, {} grads, {} velocity entries",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Domain(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            index,
            what: format!("gradient {}", grads[index]),
        });
    }

    let mu = cfg.momentum;
    for ((theta, &g), v) in params
        .0
        .iter_mut()
        .zip(grads)
        .zip(state.velocity.iter_mut())
    {
        let g = g + cfg.weight_decay * *theta;
        *v = mu * *v + g;
        let update = if cfg.nesterov { g + mu * *v } else { *v };
        *theta -= lr * update;
    }
    Ok(())
}
