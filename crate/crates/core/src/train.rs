//! Training loop, evaluation metrics and the ablation driver.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Split, WindowedDataset};
use crate::error::{FrwkvError, Result};
use crate::model::{FrwkvModel, ModelConfig, Variant};
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::tensor::Tensor;

/// Windows per forward pass during evaluation. Per-window results do not
/// depend on it.
const EVAL_BATCH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Global gradient-norm clip; `f64::INFINITY` disables clipping.
    pub clip_norm: f64,
    /// Seeds the batch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is accepted so a run can be frozen deliberately.
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(FrwkvError::config(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(FrwkvError::config("batch_size, max_epochs and patience must be >= 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(FrwkvError::config(format!("clip_norm must be > 0, got {}", self.clip_norm)));
        }
        Ok(())
    }
}

/// Scale in which metrics are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Original data units.
    Raw,
    /// Globally z-scored with training-split statistics.
    Scaled,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Raw => "raw",
            Units::Scaled => "scaled",
        })
    }
}

/// Error metrics over every window of one split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub split: Split,
    pub mse: f64,
    pub mae: f64,
    pub windows: usize,
    pub horizon: usize,
    pub units: Units,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub test: EvalMetrics,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

fn check_shapes(pred: &Tensor, target: &Tensor, op: &'static str) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(FrwkvError::Dimension {
            op,
            lhs: pred.shape().to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    if pred.numel() == 0 {
        return Err(FrwkvError::contract(format!("{op} of empty tensors")));
    }
    Ok(())
}

pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_shapes(pred, target, "mse")?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sum / pred.numel() as f64)
}

pub fn mae(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_shapes(pred, target, "mae")?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / pred.numel() as f64)
}

fn check_compat(model: &FrwkvModel, data: &WindowedDataset) -> Result<()> {
    let c = model.config();
    if (c.seq_len, c.horizon, c.n_vars) != (data.seq_len(), data.horizon(), data.n_vars()) {
        return Err(FrwkvError::config(format!(
            "model expects seq_len={} horizon={} n_vars={}, dataset has {} / {} / {}",
            c.seq_len,
            c.horizon,
            c.n_vars,
            data.seq_len(),
            data.horizon(),
            data.n_vars()
        )));
    }
    Ok(())
}

/// Forecasts `[K, N, τ]` for every window of `split`, in time order.
pub fn predict_split(model: &FrwkvModel, data: &WindowedDataset, split: Split) -> Result<(Tensor, Tensor)> {
    check_compat(model, data)?;
    let idx = data.indices(split);
    if idx.is_empty() {
        return Err(FrwkvError::Data(format!("{split} split has no windows")));
    }
    let (n, tau) = (data.n_vars(), data.horizon());
    let mut preds = Vec::with_capacity(idx.len() * n * tau);
    let mut targets = Vec::with_capacity(idx.len() * n * tau);
    for chunk in idx.chunks(EVAL_BATCH) {
        let (x, y) = data.batch(chunk);
        preds.extend_from_slice(model.predict(&x)?.data());
        targets.extend_from_slice(y.data());
    }
    let shape = [idx.len(), n, tau];
    Ok((Tensor::new(&shape, preds)?, Tensor::new(&shape, targets)?))
}

/// MSE and MAE over every window of `split`.
pub fn evaluate(model: &FrwkvModel, data: &WindowedDataset, split: Split) -> Result<EvalMetrics> {
    let (pred, target) = predict_split(model, data, split)?;
    Ok(EvalMetrics {
        split,
        mse: mse(&pred, &target)?,
        mae: mae(&pred, &target)?,
        windows: pred.shape()[0],
        horizon: data.horizon(),
        units: if data.scaler().is_some() { Units::Scaled } else { Units::Raw },
    })
}

/// Adam on MSE with gradient clipping and early stopping on validation MSE.
/// The best-validation parameters are restored before the test evaluation.
pub fn train(model: &mut FrwkvModel, data: &WindowedDataset, cfg: &TrainConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    check_compat(model, data)?;
    let train_idx = data.indices(Split::Train);
    if train_idx.is_empty() || data.count(Split::Val) == 0 {
        return Err(FrwkvError::Data("training needs non-empty train and val splits".into()));
    }
    let mut adam = Adam::new(
        model.params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = train_idx;
    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.params().snapshot());
    let mut stale = 0;
    let mut step = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let (x, y) = data.batch(chunk);
            let loss = match model.loss_and_grad(&x, &y) {
                Ok(l) => l,
                Err(FrwkvError::NonFinite { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(FrwkvError::Diverged { epoch, step, loss });
            }
            sum += loss * chunk.len() as f64;
            clip_grad_norm(model.params_mut(), cfg.clip_norm);
            adam.step(model.params_mut())?;
        }
        let train_loss = sum / order.len() as f64;
        let val_loss = evaluate(model, data, Split::Val)?.mse;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params().snapshot());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, snapshot) = best;
    if best_epoch == 0 {
        return Err(FrwkvError::Diverged {
            epoch: epochs.len(),
            step,
            loss: f64::NAN,
        });
    }
    model.params_mut().restore(&snapshot)?;
    model.params_mut().zero_grads();
    let test = evaluate(model, data, Split::Test)?;
    Ok(MetricsReport {
        test,
        epochs,
        best_epoch,
        best_val_loss,
        stopped_early,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub seed: u64,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// Seed-major, variant order as requested.
    pub rows: Vec<AblationRow>,
    pub units: Units,
}

impl AblationReport {
    pub fn row(&self, variant: Variant, seed: u64) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant && r.seed == seed)
    }

    /// Mean test MSE and MAE of one variant across seeds.
    pub fn mean(&self, variant: Variant) -> Option<(f64, f64)> {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.variant == variant).collect();
        if rows.is_empty() {
            return None;
        }
        let k = rows.len() as f64;
        Some((rows.iter().map(|r| r.mse).sum::<f64>() / k, rows.iter().map(|r| r.mae).sum::<f64>() / k))
    }

    /// Seeds on which `variant` has strictly lower test MSE than every other
    /// variant present.
    pub fn wins(&self, variant: Variant) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        seeds.dedup();
        seeds
            .into_iter()
            .filter(|&s| {
                let Some(me) = self.row(variant, s) else { return false };
                self.rows.iter().filter(|r| r.seed == s && r.variant != variant).all(|r| me.mse < r.mse)
            })
            .collect()
    }
}

/// Trains every variant in `variants` once per seed under the same budget.
/// The seed drives both initialization and batch order. Runs execute on
/// separate threads; each run is itself deterministic.
pub fn run_ablation_with(
    variants: &[Variant],
    data: &WindowedDataset,
    model: ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    let jobs: Vec<(u64, Variant)> = seeds.iter().flat_map(|&s| variants.iter().map(move |&v| (s, v))).collect();
    let results: Vec<Result<AblationRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(seed, variant)| {
                scope.spawn(move || {
                    let mut m = FrwkvModel::build(ModelConfig { seed, ..model }, variant)?;
                    let report = train(&mut m, data, &TrainConfig { seed, ..*train_cfg })?;
                    Ok(AblationRow {
                        variant,
                        seed,
                        mse: report.test.mse,
                        mae: report.test.mae,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ablation worker panicked")).collect()
    });
    Ok(AblationReport {
        rows: results.into_iter().collect::<Result<_>>()?,
        units: if data.scaler().is_some() { Units::Scaled } else { Units::Raw },
    })
}

/// Full, NoFr and NoLa under identical seeds and budget.
pub fn run_ablation(data: &WindowedDataset, model: ModelConfig, train_cfg: &TrainConfig, seeds: &[u64]) -> Result<AblationReport> {
    run_ablation_with(&Variant::ALL, data, model, train_cfg, seeds)
}
