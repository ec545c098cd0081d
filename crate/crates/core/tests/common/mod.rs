//! Oracles shared by the integration suites. Nothing here calls into the
//! code paths it is used to check.
#![allow(dead_code)]

pub mod dft;
pub mod encoder_oracle;

use frwkv::model::FrwkvModel;
use frwkv::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Gradients below this magnitude are compared absolutely: central
/// differences carry ~1e-10 absolute error from rounding.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Adds uniform noise to every parameter so zero-initialized paths carry
/// signal.
pub fn perturb(model: &mut FrwkvModel, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for p in model.params_mut().iter_mut() {
        for v in p.tensor.data_mut() {
            *v += r.gen_range(-scale..scale);
        }
    }
    model.params_mut().apply_constraints();
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Central difference of `f` around `x[j]`.
pub fn central_diff(x: &mut [f64], j: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[j];
    x[j] = orig + FD_STEP;
    let up = f(x);
    x[j] = orig - FD_STEP;
    let down = f(x);
    x[j] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// Worst relative error over every scalar parameter of `model` for the
/// MSE loss on `(x, y)`. Returns `(worst, name of worst parameter, count)`.
pub fn model_gradcheck(model: &mut FrwkvModel, x: &Tensor, y: &Tensor) -> (f64, String, usize) {
    model.loss_and_grad(x, y).unwrap();
    let grads: Vec<Vec<f64>> = model.params().iter().map(|p| p.tensor.grad.clone().unwrap()).collect();
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    let mut worst = (0.0, String::new());
    let mut count = 0;
    let ids: Vec<_> = model.params().ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        let n = model.params().get(id).numel();
        for j in 0..n {
            let orig = model.params().get(id).data()[j];
            model.params_mut().get_mut(id).data_mut()[j] = orig + FD_STEP;
            let up = model.loss(x, y).unwrap();
            model.params_mut().get_mut(id).data_mut()[j] = orig - FD_STEP;
            let down = model.loss(x, y).unwrap();
            model.params_mut().get_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let e = rel_err(grads[pi][j], numeric);
            if e > worst.0 {
                worst = (e, format!("{}[{j}] analytic={} numeric={}", names[pi], grads[pi][j], numeric));
            }
            count += 1;
        }
    }
    (worst.0, worst.1, count)
}
