//! Reversible instance normalization.
//!
//! Each input window is standardized per variable over its own time axis and
//! passed through a learnable per-variable affine map. The stored statistics
//! undo the transformation on the forecast.

use crate::autodiff::{Tape, Var};
use crate::error::{FrwkvError, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Added to the variance before the square root.
pub const REVIN_EPS: f64 = 1e-5;

/// Per-window statistics plus the affine parameters they were used with.
#[derive(Debug, Clone, PartialEq)]
pub struct RevinStats {
    /// `[B, N]`
    pub mean: Tensor,
    /// `[B, N]`, population standard deviation with [`REVIN_EPS`] folded in.
    pub std: Tensor,
    /// `[N]`
    pub gamma: Tensor,
    /// `[N]`
    pub beta: Tensor,
}

fn dims3(x: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match x.shape() {
        &[b, n, t] => Ok((b, n, t)),
        s => Err(FrwkvError::contract(format!("{what} expects [B, N, L], got {s:?}"))),
    }
}

/// Mean and std over the last axis of `[B, N, T]`.
pub fn instance_stats(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (b, n, t) = dims3(x, "instance_stats")?;
    if t < 2 {
        return Err(FrwkvError::contract(format!("normalization needs T >= 2, got {t}")));
    }
    let mut mean = vec![0.0; b * n];
    let mut std = vec![0.0; b * n];
    for (row, chunk) in x.data().chunks(t).enumerate() {
        let m = chunk.iter().sum::<f64>() / t as f64;
        let var = chunk.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64;
        mean[row] = m;
        std[row] = (var + REVIN_EPS).sqrt();
    }
    Ok((
        Tensor::from_parts(vec![b, n], mean),
        Tensor::from_parts(vec![b, n], std),
    ))
}

fn check_affine(n: usize, gamma: &Tensor, beta: &Tensor) -> Result<()> {
    if gamma.shape() != [n] || beta.shape() != [n] {
        return Err(FrwkvError::Dimension {
            op: "revin affine",
            lhs: gamma.shape().to_vec(),
            rhs: vec![n],
        });
    }
    Ok(())
}

/// `γ ⊙ (X − mean)/std + β` for `X: [B, N, T]`.
pub fn revin_normalize(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(Tensor, RevinStats)> {
    let (_, n, t) = dims3(x, "revin_normalize")?;
    check_affine(n, gamma, beta)?;
    let (mean, std) = instance_stats(x)?;
    let mut out = x.data().to_vec();
    for (row, chunk) in out.chunks_mut(t).enumerate() {
        let v = row % n;
        let (m, s) = (mean.data()[row], std.data()[row]);
        let (g, bb) = (gamma.data()[v], beta.data()[v]);
        chunk.iter_mut().for_each(|x| *x = g * (*x - m) / s + bb);
    }
    let stats = RevinStats {
        mean,
        std,
        gamma: gamma.clone(),
        beta: beta.clone(),
    };
    Ok((Tensor::from_parts(x.shape().to_vec(), out), stats))
}

/// `(Y − β)/γ ⊙ std + mean` for `Y: [B, N, τ]`.
pub fn revin_denormalize(y: &Tensor, stats: &RevinStats) -> Result<Tensor> {
    let (b, n, tau) = dims3(y, "revin_denormalize")?;
    if stats.mean.shape() != [b, n] {
        return Err(FrwkvError::Dimension {
            op: "revin_denormalize",
            lhs: y.shape().to_vec(),
            rhs: stats.mean.shape().to_vec(),
        });
    }
    if let Some(g) = stats.gamma.data().iter().find(|g| g.abs() < REVIN_EPS) {
        return Err(FrwkvError::contract(format!("affine gain {g} is not invertible")));
    }
    let mut out = y.data().to_vec();
    for (row, chunk) in out.chunks_mut(tau).enumerate() {
        let v = row % n;
        let (m, s) = (stats.mean.data()[row], stats.std.data()[row]);
        let (g, bb) = (stats.gamma.data()[v], stats.beta.data()[v]);
        chunk.iter_mut().for_each(|x| *x = (*x - bb) / g * s + m);
    }
    Ok(Tensor::from_parts(y.shape().to_vec(), out))
}

/// Learnable RevIN layer.
#[derive(Debug, Clone, Copy)]
pub struct Revin {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub n_vars: usize,
}

/// Statistics captured by [`Revin::normalize`] for the paired inverse.
#[derive(Debug, Clone)]
pub struct InstanceStats {
    pub mean: Tensor,
    pub std: Tensor,
}

impl Revin {
    pub fn new(store: &mut ParamStore, n_vars: usize) -> Self {
        let gamma = store.add("revin.gamma", Tensor::ones(&[n_vars]));
        let beta = store.add("revin.beta", Tensor::zeros(&[n_vars]));
        Self { gamma, beta, n_vars }
    }

    /// Normalizes `x: [B, N, T]` and returns it time-major as `[B, T, N]`.
    pub fn normalize(&self, tape: &mut Tape, bound: &Bound, x: &Tensor) -> Result<(Var, InstanceStats)> {
        let (_, n, t) = dims3(x, "revin")?;
        if n != self.n_vars {
            return Err(FrwkvError::config(format!("model has {} variables, input has {n}", self.n_vars)));
        }
        let (mean, std) = instance_stats(x)?;
        let mut z = x.data().to_vec();
        for (row, chunk) in z.chunks_mut(t).enumerate() {
            let (m, s) = (mean.data()[row], std.data()[row]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        let z = Tensor::from_parts(x.shape().to_vec(), z).transpose_last2();
        let z = tape.constant(z);
        let scaled = tape.mul(z, bound.var(self.gamma))?;
        let shifted = tape.add(scaled, bound.var(self.beta))?;
        Ok((shifted, InstanceStats { mean, std }))
    }

    /// Inverts [`Revin::normalize`] on a time-major `[B, τ, N]` forecast and
    /// returns it as `[B, N, τ]`.
    pub fn denormalize(&self, tape: &mut Tape, bound: &Bound, y: Var, stats: &InstanceStats) -> Result<Var> {
        let gamma = tape.value(bound.var(self.gamma));
        if let Some(g) = gamma.data().iter().find(|g| g.abs() < REVIN_EPS) {
            return Err(FrwkvError::contract(format!("affine gain {g} is not invertible")));
        }
        let centered = tape.sub(y, bound.var(self.beta))?;
        let unscaled = tape.div(centered, bound.var(self.gamma))?;
        let var_major = tape.transpose_last2(unscaled)?;
        let std = tape.constant(stats.std.clone());
        let mean = tape.constant(stats.mean.clone());
        let rescaled = tape.mul_expand(var_major, std)?;
        tape.add_expand(rescaled, mean)
    }
}
