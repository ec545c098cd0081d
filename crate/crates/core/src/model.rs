//! The end-to-end forecaster and its ablation variants.
//!
//! ```text
//! X[B,N,T] → RevIN → embed N→C → rFFT over time ─┬─ re → encoder stack ─┐
//!                                                └─ im → encoder stack ─┴→ irFFT
//!          → time head T→τ → de-embed C→N → RevIN⁻¹ → Ŷ[B,N,τ]
//! ```
//!
//! `NoFr` replaces the transform pair with one learned `T→T` map per
//! channel and runs both stacks on time-domain tokens, averaging their
//! outputs. `NoLa` replaces each encoder stack with a single bias-free
//! `C→C` linear layer per token.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::encoder::{EncoderDims, EncoderLayer};
use crate::error::{FrwkvError, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::revin::Revin;
use crate::spectral::{irfft_tape, num_bins, rfft_tape};
use crate::tensor::Tensor;

/// Architecture hyperparameters. The embedding width equals `d_model`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub seq_len: usize,
    pub horizon: usize,
    pub n_vars: usize,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seq_len: 96,
            horizon: 96,
            n_vars: 7,
            d_model: 16,
            heads: 2,
            layers: 1,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len < 2 {
            return Err(FrwkvError::config(format!("seq_len must be >= 2, got {}", self.seq_len)));
        }
        if self.horizon < 1 {
            return Err(FrwkvError::config("horizon must be >= 1"));
        }
        if self.n_vars < 1 {
            return Err(FrwkvError::config("n_vars must be >= 1"));
        }
        if self.layers < 1 {
            return Err(FrwkvError::config("layers must be >= 1"));
        }
        EncoderDims::new(self.d_model, self.heads)?;
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Frequency bins seen by the encoders in the full model.
    pub fn bins(&self) -> usize {
        num_bins(self.seq_len)
    }

    pub fn encoder_dims(&self) -> Result<EncoderDims> {
        EncoderDims::new(self.d_model, self.heads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    /// Frequency transform replaced by a linear time-domain layer.
    NoFr,
    /// Linear-attention encoders replaced by linear layers.
    NoLa,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoFr, Variant::NoLa];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::NoFr => "no-fr",
            Variant::NoLa => "no-la",
        })
    }
}

impl FromStr for Variant {
    type Err = FrwkvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "no-fr" | "nofr" => Ok(Variant::NoFr),
            "no-la" | "nola" => Ok(Variant::NoLa),
            other => Err(FrwkvError::config(format!("unknown variant '{other}' (expected full, no-fr, no-la)"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    Spectral {
        real: Vec<EncoderLayer>,
        imag: Vec<EncoderLayer>,
    },
    TimeDomain {
        mix_w: ParamId,
        mix_b: ParamId,
        real: Vec<EncoderLayer>,
        imag: Vec<EncoderLayer>,
    },
    SpectralLinear {
        real_w: ParamId,
        imag_w: ParamId,
    },
}

/// What the forward pass did, for instrumentation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwardTrace {
    /// Token count seen by each encoder stack invocation.
    pub encoder_tokens: Vec<usize>,
}

pub struct Forward {
    pub output: Var,
    pub bound: Bound,
    pub trace: ForwardTrace,
}

#[derive(Debug, Clone)]
pub struct FrwkvModel {
    config: ModelConfig,
    variant: Variant,
    store: ParamStore,
    revin: Revin,
    embed: ParamId,
    body: Body,
    head_w: ParamId,
    head_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    bypass_encoders: bool,
}

fn stack(store: &mut ParamStore, prefix: &str, config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Vec<EncoderLayer>> {
    let dims = config.encoder_dims()?;
    Ok((0..config.layers)
        .map(|l| EncoderLayer::new(store, &format!("{prefix}.{l}"), dims, rng))
        .collect())
}

fn inv_sqrt(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

impl FrwkvModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        Self::build(config, Variant::Full)
    }

    /// Builds the model for one ablation variant. Initialization is a pure
    /// function of `(config, variant)`.
    pub fn build(config: ModelConfig, variant: Variant) -> Result<Self> {
        config.validate()?;
        let (t, tau, n, c) = (config.seq_len, config.horizon, config.n_vars, config.d_model);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let revin = Revin::new(&mut store, n);
        let embed = store.add_uniform("embed.w", &[n, c], inv_sqrt(n), &mut rng);
        let body = match variant {
            Variant::Full => Body::Spectral {
                real: stack(&mut store, "real", &config, &mut rng)?,
                imag: stack(&mut store, "imag", &config, &mut rng)?,
            },
            Variant::NoFr => {
                let mix_w = store.add_uniform("time_mix.w", &[t, t], inv_sqrt(t), &mut rng);
                let mix_b = store.add("time_mix.b", Tensor::zeros(&[t]));
                Body::TimeDomain {
                    mix_w,
                    mix_b,
                    real: stack(&mut store, "real", &config, &mut rng)?,
                    imag: stack(&mut store, "imag", &config, &mut rng)?,
                }
            }
            Variant::NoLa => Body::SpectralLinear {
                real_w: store.add_uniform("real.linear.w", &[c, c], inv_sqrt(c), &mut rng),
                imag_w: store.add_uniform("imag.linear.w", &[c, c], inv_sqrt(c), &mut rng),
            },
        };
        let head_w = store.add_uniform("head.w", &[t, tau], inv_sqrt(t), &mut rng);
        let head_b = store.add("head.b", Tensor::zeros(&[tau]));
        let out_w = store.add_uniform("out.w", &[c, n], inv_sqrt(c), &mut rng);
        let out_b = store.add("out.b", Tensor::zeros(&[n]));
        Ok(Self {
            config,
            variant,
            store,
            revin,
            embed,
            body,
            head_w,
            head_b,
            out_w,
            out_b,
            bypass_encoders: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn parameter_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn embed_param(&self) -> ParamId {
        self.embed
    }

    /// Test hook: treat every encoder layer as the identity.
    #[doc(hidden)]
    pub fn set_encoder_bypass(&mut self, bypass: bool) {
        self.bypass_encoders = bypass;
    }

    /// Encoder layers of the real and imaginary stacks (empty for `NoLa`).
    pub fn encoder_layers(&self) -> (&[EncoderLayer], &[EncoderLayer]) {
        match &self.body {
            Body::Spectral { real, imag } | Body::TimeDomain { real, imag, .. } => (real, imag),
            Body::SpectralLinear { .. } => (&[], &[]),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        match *x.shape() {
            [b, n, t] if n == self.config.n_vars && t == self.config.seq_len => Ok(b),
            _ => Err(FrwkvError::config(format!(
                "input shape {:?} does not match [B, {}, {}]",
                x.shape(),
                self.config.n_vars,
                self.config.seq_len
            ))),
        }
    }

    fn run_stack(&self, tape: &mut Tape, bound: &Bound, layers: &[EncoderLayer], x: Var, trace: &mut ForwardTrace) -> Result<Var> {
        trace.encoder_tokens.push(tape.shape(x)[1]);
        if self.bypass_encoders {
            return Ok(x);
        }
        let mut h = x;
        for layer in layers {
            h = layer.forward(tape, bound, h)?;
        }
        Ok(h)
    }

    /// Records the forward pass of `x: [B, N, T]` and returns `[B, N, τ]`.
    pub fn forward(&self, tape: &mut Tape, x: &Tensor) -> Result<Forward> {
        self.check_input(x)?;
        if !x.is_finite() {
            return Err(FrwkvError::NonFinite {
                stage: "input".into(),
                step: 0,
            });
        }
        let t = self.config.seq_len;
        let bound = self.store.bind(tape);
        let p = |id: ParamId| bound.var(id);
        let mut trace = ForwardTrace::default();

        let (z, stats) = self.revin.normalize(tape, &bound, x)?;
        check(tape, z, "normalization")?;
        let e = tape.linear(z, p(self.embed))?; // [B, T, C]

        let time_features = match &self.body {
            Body::Spectral { real, imag } => {
                let (re, im) = self.to_spectrum(tape, e)?;
                let re = self.run_stack(tape, &bound, real, re, &mut trace)?;
                let im = self.run_stack(tape, &bound, imag, im, &mut trace)?;
                check(tape, re, "real branch")?;
                check(tape, im, "imaginary branch")?;
                self.from_spectrum(tape, re, im, t)?
            }
            Body::TimeDomain { mix_w, mix_b, real, imag } => {
                let et = tape.transpose_last2(e)?;
                let mixed = tape.linear(et, p(*mix_w))?;
                let mixed = tape.add(mixed, p(*mix_b))?;
                let tokens = tape.transpose_last2(mixed)?;
                let a = self.run_stack(tape, &bound, real, tokens, &mut trace)?;
                let b = self.run_stack(tape, &bound, imag, tokens, &mut trace)?;
                let sum = tape.add(a, b)?;
                let avg = tape.scale(sum, 0.5);
                check(tape, avg, "time-domain branches")?;
                tape.transpose_last2(avg)?
            }
            Body::SpectralLinear { real_w, imag_w } => {
                let (re, im) = self.to_spectrum(tape, e)?;
                let re = tape.linear(re, p(*real_w))?;
                let im = tape.linear(im, p(*imag_w))?;
                self.from_spectrum(tape, re, im, t)?
            }
        }; // [B, C, T]
        check(tape, time_features, "inverse transform")?;

        let h = tape.linear(time_features, p(self.head_w))?;
        let h = tape.add(h, p(self.head_b))?; // [B, C, τ]
        let h = tape.transpose_last2(h)?;
        let y = tape.linear(h, p(self.out_w))?;
        let y = tape.add(y, p(self.out_b))?; // [B, τ, N]
        check(tape, y, "projection")?;
        let out = self.revin.denormalize(tape, &bound, y, &stats)?;
        check(tape, out, "denormalization")?;
        Ok(Forward {
            output: out,
            bound,
            trace,
        })
    }

    /// `[B, T, C]` → real and imaginary `[B, F, C]`.
    fn to_spectrum(&self, tape: &mut Tape, e: Var) -> Result<(Var, Var)> {
        let et = tape.transpose_last2(e)?;
        let (re, im) = rfft_tape(tape, et)?;
        Ok((tape.transpose_last2(re)?, tape.transpose_last2(im)?))
    }

    /// Real and imaginary `[B, F, C]` → `[B, C, T]`.
    fn from_spectrum(&self, tape: &mut Tape, re: Var, im: Var, t: usize) -> Result<Var> {
        let re = tape.transpose_last2(re)?;
        let im = tape.transpose_last2(im)?;
        irfft_tape(tape, re, im, t)
    }

    /// Forecast without recording gradients.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::inference();
        let f = self.forward(&mut tape, x)?;
        Ok(tape.value(f.output).clone())
    }

    /// Forecast plus instrumentation.
    pub fn predict_traced(&self, x: &Tensor) -> Result<(Tensor, ForwardTrace)> {
        let mut tape = Tape::inference();
        let f = self.forward(&mut tape, x)?;
        Ok((tape.value(f.output).clone(), f.trace))
    }

    /// Mean squared error of the forecast, without gradients.
    pub fn loss(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        let pred = self.predict(x)?;
        mse_tensor(&pred, y)
    }

    /// Mean squared error and its gradient, written into each parameter's
    /// `grad`.
    pub fn loss_and_grad(&mut self, x: &Tensor, y: &Tensor) -> Result<f64> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, x)?;
        if tape.shape(f.output) != y.shape() {
            return Err(FrwkvError::Dimension {
                op: "loss",
                lhs: tape.shape(f.output).to_vec(),
                rhs: y.shape().to_vec(),
            });
        }
        let target = tape.constant(y.clone());
        let diff = tape.sub(f.output, target)?;
        let sq = tape.mul(diff, diff)?;
        let loss = tape.mean(sq);
        tape.backward(loss)?;
        self.store.collect_grads(&tape, &f.bound);
        Ok(tape.value(loss).item())
    }
}

fn check(tape: &Tape, v: Var, stage: &str) -> Result<()> {
    if tape.value(v).is_finite() {
        Ok(())
    } else {
        Err(FrwkvError::NonFinite {
            stage: stage.into(),
            step: 0,
        })
    }
}

fn mse_tensor(pred: &Tensor, y: &Tensor) -> Result<f64> {
    if pred.shape() != y.shape() {
        return Err(FrwkvError::Dimension {
            op: "mse",
            lhs: pred.shape().to_vec(),
            rhs: y.shape().to_vec(),
        });
    }
    Ok(pred.data().iter().zip(y.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.numel() as f64)
}

/// Per-variable linear embedding `[B, T, N] → [B, T, C]` with the given
/// weight, without recording. Used to check the embedding contract.
pub fn embed(x_time_major: &Tensor, w: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::inference();
    let xv = tape.constant(x_time_major.clone());
    let wv = tape.constant(w.clone());
    let e = tape.linear(xv, wv)?;
    Ok(tape.value(e).clone())
}
