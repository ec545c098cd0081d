//! Adam with bias correction, plus global-norm gradient clipping.

use crate::error::{FrwkvError, Result};
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient held NaN or ±inf; nothing was touched.
    SkippedNonFinite,
}

/// One Adam update at step `t` (1-based).
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut AdamMoments,
    cfg: &AdamConfig,
    t: u64,
) -> Result<StepOutcome> {
    if params.len() != grads.len() || params.len() != moments.m.len() || params.len() != moments.v.len() {
        return Err(FrwkvError::Dimension {
            op: "adam_step",
            lhs: vec![params.len()],
            rhs: vec![grads.len(), moments.m.len(), moments.v.len()],
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(StepOutcome::SkippedNonFinite);
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for j in 0..params.len() {
        let g = grads[j];
        moments.m[j] = cfg.beta1 * moments.m[j] + (1.0 - cfg.beta1) * g;
        moments.v[j] = cfg.beta2 * moments.v[j] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.m[j] / bc1;
        let v_hat = moments.v[j] / bc2;
        params[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(StepOutcome::Applied)
}

/// Adam over a whole [`ParamStore`], reading `Tensor::grad`.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    moments: Vec<AdamMoments>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        Self {
            config,
            moments: store.iter().map(|p| AdamMoments::zeros(p.tensor.numel())).collect(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update to every parameter, then re-imposes constraints.
    /// The whole step is skipped if any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<StepOutcome> {
        let finite = store
            .iter()
            .all(|p| p.tensor.grad.as_ref().map_or(true, |g| g.iter().all(|v| v.is_finite())));
        if !finite {
            return Ok(StepOutcome::SkippedNonFinite);
        }
        self.t += 1;
        for (p, mom) in store.iter_mut().zip(&mut self.moments) {
            let Some(grad) = p.tensor.grad.take() else { continue };
            adam_step(p.tensor.data_mut(), &grad, mom, &self.config, self.t)?;
            p.tensor.grad = Some(grad);
        }
        store.apply_constraints();
        Ok(StepOutcome::Applied)
    }
}

pub fn global_grad_norm(store: &ParamStore) -> f64 {
    store
        .iter()
        .filter_map(|p| p.tensor.grad.as_ref())
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = global_grad_norm(store);
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for p in store.iter_mut() {
            if let Some(g) = p.tensor.grad.as_mut() {
                g.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    norm
}
