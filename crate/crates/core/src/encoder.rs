//! Linear-attention encoder block run over a token sequence.
//!
//! Per token: shift and mix with the previous token, project to receptance,
//! key, value and gate, derive per-channel decay and replacement strength
//! from two small MLPs, then update a per-head matrix state
//!
//! ```text
//! G_t = Diag(d_t) − k̃_t i_tᵀ
//! S_t = G_t S_{t−1} + v_t k̂_tᵀ
//! y_t = S_t r_t
//! ```
//!
//! and emit `o_t = g_t ⊙ W_o (y_t + β_t v_t)` with the bonus
//! `β_t = r_tᵀ B k̂_t` taken per head. The state has a fixed size, so a
//! sequence of length `L` costs exactly `L` state updates.
//!
//! Each block is wrapped as `x + o(prenorm(x))`, where the pre-norm
//! standardizes each token over its channels and applies a learnable gain.
//!
//! Two execution paths exist: [`EncoderLayer::forward`] records a batched
//! computation on a [`Tape`] for training, and
//! [`EncoderLayer::forward_sequence`] steps through a single sequence with
//! the per-token functions below and no recording.

use rand::Rng;

use crate::autodiff::{l2_normalize_in_place, sigmoid, Function, Tape, Var, LAYER_NORM_EPS};
use crate::error::{FrwkvError, Result};
use crate::params::{Bound, Constraint, ParamId, ParamStore};
use crate::tensor::Tensor;

pub const DECAY_BIAS_INIT: f64 = 2.0;
pub const REPLACEMENT_BIAS_INIT: f64 = -2.0;
pub const MU_INIT: f64 = 0.5;

/// Hidden width of the decay and replacement MLPs.
pub fn mlp_hidden(c: usize) -> usize {
    (c / 4).max(8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub channels: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub hidden: usize,
}

impl EncoderDims {
    pub fn new(channels: usize, heads: usize) -> Result<Self> {
        if heads == 0 || channels == 0 || channels % heads != 0 {
            return Err(FrwkvError::config(format!(
                "{heads} heads do not divide {channels} channels"
            )));
        }
        Ok(Self {
            channels,
            heads,
            head_dim: channels / heads,
            hidden: mlp_hidden(channels),
        })
    }

    /// Scalar parameters in one block.
    pub fn param_count(&self) -> usize {
        let (c, h) = (self.channels, self.hidden);
        let norm = c;
        let mu = c;
        let maps = 5 * c * c; // r, k, v, g, o
        let mlp = c * h + h + h * c + c;
        let bonus = c;
        norm + mu + maps + 2 * mlp + bonus
    }

    /// Floats held by the recurrent state, independent of sequence length.
    pub fn state_len(&self) -> usize {
        self.heads * self.head_dim * self.head_dim
    }
}

#[derive(Debug, Clone, Copy)]
struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    fn new(store: &mut ParamStore, prefix: &str, dims: &EncoderDims, out_bias: f64, rng: &mut impl Rng) -> Self {
        let (c, h) = (dims.channels, dims.hidden);
        let w1 = store.add_uniform(format!("{prefix}.w1"), &[c, h], 1.0 / (c as f64).sqrt(), rng);
        let b1 = store.add(format!("{prefix}.b1"), Tensor::zeros(&[h]));
        let w2 = store.add_uniform(format!("{prefix}.w2"), &[h, c], 1.0 / (h as f64).sqrt(), rng);
        let b2 = store.add(format!("{prefix}.b2"), Tensor::full(&[c], out_bias));
        Self { w1, b1, w2, b2 }
    }

    fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let a = tape.linear(x, bound.var(self.w1))?;
        let a = tape.add(a, bound.var(self.b1))?;
        let a = tape.tanh(a);
        let b = tape.linear(a, bound.var(self.w2))?;
        let b = tape.add(b, bound.var(self.b2))?;
        Ok(tape.sigmoid(b))
    }

    fn eval(&self, store: &ParamStore, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        vec_mat(x, store.get(self.w1).data(), hidden);
        for (h, b) in hidden.iter_mut().zip(store.get(self.b1).data()) {
            *h = (*h + b).tanh();
        }
        vec_mat(hidden, store.get(self.w2).data(), out);
        for (o, b) in out.iter_mut().zip(store.get(self.b2).data()) {
            *o = sigmoid(*o + b);
        }
    }
}

/// `out = x · W` for a row vector `x[K]` and `W[K×N]`.
fn vec_mat(x: &[f64], w: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (p, &xv) in x.iter().enumerate() {
        for (o, wv) in out.iter_mut().zip(&w[p * n..(p + 1) * n]) {
            *o += xv * wv;
        }
    }
}

/// Parameters of one encoder block.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub dims: EncoderDims,
    pub norm_gain: ParamId,
    /// Token-mixing coefficient, kept in `[0, 1]`.
    pub mu: ParamId,
    pub w_r: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_g: ParamId,
    decay: Mlp,
    replacement: Mlp,
    /// Diagonal of the bonus matrix.
    pub bonus: ParamId,
    pub w_o: ParamId,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, prefix: &str, dims: EncoderDims, rng: &mut impl Rng) -> Self {
        let c = dims.channels;
        let bound = 1.0 / (c as f64).sqrt();
        let norm_gain = store.add(format!("{prefix}.norm_gain"), Tensor::ones(&[c]));
        let mu = store.add_constrained(format!("{prefix}.mu"), Tensor::full(&[c], MU_INIT), Constraint::UnitInterval);
        let w_r = store.add_uniform(format!("{prefix}.w_r"), &[c, c], bound, rng);
        let w_k = store.add_uniform(format!("{prefix}.w_k"), &[c, c], bound, rng);
        let w_v = store.add_uniform(format!("{prefix}.w_v"), &[c, c], bound, rng);
        let w_g = store.add_uniform(format!("{prefix}.w_g"), &[c, c], bound, rng);
        let decay = Mlp::new(store, &format!("{prefix}.decay"), &dims, DECAY_BIAS_INIT, rng);
        let replacement = Mlp::new(store, &format!("{prefix}.replacement"), &dims, REPLACEMENT_BIAS_INIT, rng);
        let bonus = store.add(format!("{prefix}.bonus"), Tensor::zeros(&[c]));
        let w_o = store.add_uniform(format!("{prefix}.w_o"), &[c, c], bound, rng);
        Self {
            dims,
            norm_gain,
            mu,
            w_r,
            w_k,
            w_v,
            w_g,
            decay,
            replacement,
            bonus,
            w_o,
        }
    }

    /// Batched forward over `x: [B, L, C]`, recorded on `tape`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let (b, l, c) = match shape[..] {
            [b, l, c] if c == self.dims.channels && l >= 1 => (b, l, c),
            _ => {
                return Err(FrwkvError::Dimension {
                    op: "encoder",
                    lhs: shape,
                    rhs: vec![self.dims.channels],
                })
            }
        };
        let (heads, hd) = (self.dims.heads, self.dims.head_dim);
        let p = |id: ParamId| bound.var(id);

        let h = tape.layer_norm_last(x)?;
        let h = tape.mul(h, p(self.norm_gain))?;
        let shifted = tape.token_shift(h)?;
        let delta = tape.sub(shifted, h)?;
        let delta = tape.mul(delta, p(self.mu))?;
        let mixed = tape.add(h, delta)?;

        let r = tape.linear(mixed, p(self.w_r))?;
        let k = tape.linear(mixed, p(self.w_k))?;
        let v = tape.linear(mixed, p(self.w_v))?;
        let g = tape.linear(mixed, p(self.w_g))?;
        let g = tape.sigmoid(g);
        let d = self.decay.forward(tape, bound, mixed)?;
        let i = self.replacement.forward(tape, bound, mixed)?;

        let k4 = tape.reshape(k, &[b, l, heads, hd])?;
        let kt4 = tape.l2_normalize_last(k4)?;
        let kt = tape.reshape(kt4, &[b, l, c])?;
        let kh = tape.mul(kt, i)?;

        let y = scan_tape(tape, [r, kt, kh, v, d, i], heads)?;

        let rb = tape.mul(r, p(self.bonus))?;
        let rbk = tape.mul(rb, kh)?;
        let rbk4 = tape.reshape(rbk, &[b, l, heads, hd])?;
        let beta = tape.sum_last(rbk4)?;
        let v4 = tape.reshape(v, &[b, l, heads, hd])?;
        let bv4 = tape.mul_expand(v4, beta)?;
        let bv = tape.reshape(bv4, &[b, l, c])?;
        let u = tape.add(y, bv)?;
        let proj = tape.linear(u, p(self.w_o))?;
        let o = tape.mul(g, proj)?;
        let out = tape.add(x, o)?;

        if let Some(pos) = tape.value(out).data().iter().position(|v| !v.is_finite()) {
            return Err(FrwkvError::NonFinite {
                stage: "encoder".into(),
                step: (pos / c) % l,
            });
        }
        Ok(out)
    }

    /// Step-by-step forward over one sequence `z: [L, C]`, without recording.
    pub fn forward_sequence(&self, store: &ParamStore, z: &Tensor) -> Result<(Tensor, ScanStats)> {
        let c = self.dims.channels;
        let l = match z.shape() {
            &[l, cc] if cc == c && l >= 1 => l,
            s => {
                return Err(FrwkvError::Dimension {
                    op: "encoder",
                    lhs: s.to_vec(),
                    rhs: vec![c],
                })
            }
        };
        let mut state = EncoderState::zeros(&self.dims);
        let mut stats = ScanStats {
            state_len: state.s.numel(),
            ..Default::default()
        };
        let gain = store.get(self.norm_gain).data();
        let mu = store.get(self.mu).data();
        let mut out = vec![0.0; l * c];
        let mut prev = vec![0.0; c];
        let mut cur = vec![0.0; c];
        let mut ws = StepWorkspace::new(&self.dims);
        for t in 0..l {
            let row = &z.data()[t * c..(t + 1) * c];
            pre_norm(row, gain, &mut cur);
            let mixed = mix_tokens(&cur, &prev, mu);
            let sig = project_step_into(&mixed, self, store, &mut ws);
            let (kt, kh) = prepare_keys(&sig.k, &sig.i, self.dims.heads);
            state_update_in_place(&mut state, &sig.d, &kt, &sig.i, &sig.v, &kh, &mut stats);
            if !state.s.is_finite() {
                return Err(FrwkvError::NonFinite {
                    stage: "encoder state".into(),
                    step: t,
                });
            }
            let y = readout_counted(&state, &sig.r, &mut stats);
            let o = bonus_gate(
                &sig.r,
                &kh,
                &sig.v,
                &y,
                &sig.g,
                store.get(self.bonus).data(),
                store.get(self.w_o).data(),
                self.dims.heads,
            );
            for j in 0..c {
                out[t * c + j] = row[j] + o[j];
            }
            if out[t * c..(t + 1) * c].iter().any(|v| !v.is_finite()) {
                return Err(FrwkvError::NonFinite {
                    stage: "encoder".into(),
                    step: t,
                });
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        Ok((Tensor::from_parts(vec![l, c], out), stats))
    }

    /// Evaluates the decay and replacement MLPs on one mixed token.
    pub fn decay_and_replacement(&self, store: &ParamStore, mixed: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.dims.channels;
        let mut hidden = vec![0.0; self.dims.hidden];
        let (mut d, mut i) = (vec![0.0; c], vec![0.0; c]);
        self.decay.eval(store, mixed, &mut hidden, &mut d);
        self.replacement.eval(store, mixed, &mut hidden, &mut i);
        (d, i)
    }
}

fn pre_norm(x: &[f64], gain: &[f64], out: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for j in 0..x.len() {
        out[j] = (x[j] - mean) * inv * gain[j];
    }
}

struct StepWorkspace {
    hidden: Vec<f64>,
}

impl StepWorkspace {
    fn new(dims: &EncoderDims) -> Self {
        Self {
            hidden: vec![0.0; dims.hidden],
        }
    }
}

/// Shifts rows down by one: row `t` of the result is row `t−1` of `z`, and
/// the first row is zero.
pub fn token_shift(z: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::inference();
    let v = tape.constant(z.clone());
    let s = tape.token_shift(v)?;
    Ok(tape.value(s).clone())
}

/// `(1 − μ) ⊙ z + μ ⊙ z̃`.
pub fn mix_tokens(z: &[f64], shifted: &[f64], mu: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(shifted)
        .zip(mu)
        .map(|((a, b), m)| (1.0 - m) * a + m * b)
        .collect()
}

/// Per-token projections.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSignals {
    pub r: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Output gate in (0, 1).
    pub g: Vec<f64>,
    /// Decay in (0, 1).
    pub d: Vec<f64>,
    /// Replacement strength in (0, 1).
    pub i: Vec<f64>,
}

pub fn project_step(mixed: &[f64], layer: &EncoderLayer, store: &ParamStore) -> StepSignals {
    let mut ws = StepWorkspace::new(&layer.dims);
    project_step_into(mixed, layer, store, &mut ws)
}

fn project_step_into(mixed: &[f64], layer: &EncoderLayer, store: &ParamStore, ws: &mut StepWorkspace) -> StepSignals {
    let c = layer.dims.channels;
    let map = |id: ParamId| {
        let mut out = vec![0.0; c];
        vec_mat(mixed, store.get(id).data(), &mut out);
        out
    };
    let r = map(layer.w_r);
    let k = map(layer.w_k);
    let v = map(layer.w_v);
    let g = map(layer.w_g).into_iter().map(sigmoid).collect();
    let (mut d, mut i) = (vec![0.0; c], vec![0.0; c]);
    layer.decay.eval(store, mixed, &mut ws.hidden, &mut d);
    layer.replacement.eval(store, mixed, &mut ws.hidden, &mut i);
    StepSignals { r, k, v, g, d, i }
}

/// Per-head ℓ2-normalized key `k̃` and the replacement-weighted key
/// `k̂ = k̃ ⊙ i`.
pub fn prepare_keys(k: &[f64], i: &[f64], heads: usize) -> (Vec<f64>, Vec<f64>) {
    let hd = k.len() / heads;
    let mut kt = k.to_vec();
    kt.chunks_mut(hd).for_each(l2_normalize_in_place);
    let kh = kt.iter().zip(i).map(|(a, b)| a * b).collect();
    (kt, kh)
}

/// Per-head recurrent state, `[H, D_h, D_h]`, row index = value channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub s: Tensor,
}

impl EncoderState {
    pub fn zeros(dims: &EncoderDims) -> Self {
        Self {
            s: Tensor::zeros(&[dims.heads, dims.head_dim, dims.head_dim]),
        }
    }

    pub fn heads(&self) -> usize {
        self.s.shape()[0]
    }

    pub fn head_dim(&self) -> usize {
        self.s.shape()[1]
    }
}

/// Work counters for the recurrent path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// State updates performed (one per token).
    pub steps: usize,
    /// Floating-point operations in state update and readout.
    pub flops: u64,
    /// Floats held by the state.
    pub state_len: usize,
}

/// `S ← (Diag(d) − k̃ iᵀ) S + v k̂ᵀ` for one head, with `S` row-major `D×D`.
/// `tmp` receives `iᵀ S` (length `D`).
#[inline]
fn update_head(s: &mut [f64], d: &[f64], kt: &[f64], i: &[f64], v: &[f64], kh: &[f64], tmp: &mut [f64]) {
    let n = d.len();
    tmp.iter_mut().for_each(|x| *x = 0.0);
    for e in 0..n {
        let ie = i[e];
        for (t, sv) in tmp.iter_mut().zip(&s[e * n..(e + 1) * n]) {
            *t += ie * sv;
        }
    }
    for a in 0..n {
        let (da, ka, va) = (d[a], kt[a], v[a]);
        for (c, sv) in s[a * n..(a + 1) * n].iter_mut().enumerate() {
            *sv = da * *sv - ka * tmp[c] + va * kh[c];
        }
    }
}

/// Flops charged per head and step by [`update_head`]: `2D²` for `iᵀS` and
/// `5D²` for the rank-one update.
fn update_flops(n: usize) -> u64 {
    7 * (n * n) as u64
}

fn readout_flops(n: usize) -> u64 {
    2 * (n * n) as u64
}

/// In-place state update for every head. All per-channel inputs have
/// length `C = H·D_h`.
pub fn state_update_in_place(
    state: &mut EncoderState,
    d: &[f64],
    kt: &[f64],
    i: &[f64],
    v: &[f64],
    kh: &[f64],
    stats: &mut ScanStats,
) {
    let (heads, n) = (state.heads(), state.head_dim());
    let mut tmp = vec![0.0; n];
    let s = state.s.data_mut();
    for h in 0..heads {
        let r = h * n..(h + 1) * n;
        update_head(
            &mut s[h * n * n..(h + 1) * n * n],
            &d[r.clone()],
            &kt[r.clone()],
            &i[r.clone()],
            &v[r.clone()],
            &kh[r],
            &mut tmp,
        );
        stats.flops += update_flops(n);
    }
    stats.steps += 1;
}

/// One state update, returning the new state and the per-head transition
/// matrices `G = Diag(d) − k̃ iᵀ` as `[H, D_h, D_h]`.
pub fn state_update(
    prev: &EncoderState,
    d: &[f64],
    kt: &[f64],
    i: &[f64],
    v: &[f64],
    kh: &[f64],
    step: usize,
) -> Result<(EncoderState, Tensor)> {
    let (heads, n) = (prev.heads(), prev.head_dim());
    let c = heads * n;
    for (name, x) in [("d", d), ("k̃", kt), ("i", i), ("v", v), ("k̂", kh)] {
        if x.len() != c {
            return Err(FrwkvError::contract(format!(
                "state_update: {name} has length {}, expected {c}",
                x.len()
            )));
        }
    }
    let mut next = prev.clone();
    state_update_in_place(&mut next, d, kt, i, v, kh, &mut ScanStats::default());
    if !next.s.is_finite() {
        return Err(FrwkvError::NonFinite {
            stage: "state update".into(),
            step,
        });
    }
    let mut g = vec![0.0; heads * n * n];
    for h in 0..heads {
        for a in 0..n {
            for e in 0..n {
                let diag = if a == e { d[h * n + a] } else { 0.0 };
                g[h * n * n + a * n + e] = diag - kt[h * n + a] * i[h * n + e];
            }
        }
    }
    Ok((next, Tensor::from_parts(vec![heads, n, n], g)))
}

/// `y = S r`, per head, flattened back to `C` channels.
pub fn readout(state: &EncoderState, r: &[f64]) -> Vec<f64> {
    readout_counted(state, r, &mut ScanStats::default())
}

fn readout_counted(state: &EncoderState, r: &[f64], stats: &mut ScanStats) -> Vec<f64> {
    let (heads, n) = (state.heads(), state.head_dim());
    let s = state.s.data();
    let mut y = vec![0.0; heads * n];
    for h in 0..heads {
        let sh = &s[h * n * n..(h + 1) * n * n];
        let rh = &r[h * n..(h + 1) * n];
        for a in 0..n {
            y[h * n + a] = sh[a * n..(a + 1) * n].iter().zip(rh).map(|(x, y)| x * y).sum();
        }
        stats.flops += readout_flops(n);
    }
    y
}

/// Per-head bonus `β_h = Σ_{j∈h} r_j B_j k̂_j`.
pub fn bonus_coefficients(r: &[f64], kh: &[f64], bonus: &[f64], heads: usize) -> Vec<f64> {
    let hd = r.len() / heads;
    (0..heads)
        .map(|h| (h * hd..(h + 1) * hd).map(|j| r[j] * bonus[j] * kh[j]).sum())
        .collect()
}

/// `o = g ⊙ W_o (y + β v)` with `β` broadcast inside each head.
/// `w_o` is row-major `[C, C]` acting on row vectors.
#[allow(clippy::too_many_arguments)]
pub fn bonus_gate(r: &[f64], kh: &[f64], v: &[f64], y: &[f64], g: &[f64], bonus: &[f64], w_o: &[f64], heads: usize) -> Vec<f64> {
    let c = r.len();
    let hd = c / heads;
    let beta = bonus_coefficients(r, kh, bonus, heads);
    let u: Vec<f64> = (0..c).map(|j| y[j] + beta[j / hd] * v[j]).collect();
    let mut proj = vec![0.0; c];
    vec_mat(&u, w_o, &mut proj);
    proj.iter().zip(g).map(|(p, gv)| p * gv).collect()
}

/// Batched recurrent scan as a tape op. Inputs are `[r, k̃, k̂, v, d, i]`,
/// each `[B, L, C]`; the output is `y: [B, L, C]`.
pub fn scan_tape(tape: &mut Tape, inputs: [Var; 6], heads: usize) -> Result<Var> {
    let shape = tape.shape(inputs[0]).to_vec();
    for &v in &inputs[1..] {
        if tape.shape(v) != shape.as_slice() {
            return Err(FrwkvError::Dimension {
                op: "scan",
                lhs: shape,
                rhs: tape.shape(v).to_vec(),
            });
        }
    }
    let [b, l, c] = shape[..] else {
        return Err(FrwkvError::contract(format!("scan expects [B, L, C], got {shape:?}")));
    };
    if heads == 0 || c % heads != 0 {
        return Err(FrwkvError::config(format!("{heads} heads do not divide {c} channels")));
    }
    let n = c / heads;
    let keep = tape.grad_enabled();
    let data: Vec<&[f64]> = inputs.iter().map(|&v| tape.value(v).data()).collect();
    let (r, kt, kh, v, d, i) = (data[0], data[1], data[2], data[3], data[4], data[5]);

    let mut y = vec![0.0; b * l * c];
    let per_seq = heads * (l + 1) * n * n;
    let mut states = if keep { vec![0.0; b * per_seq] } else { Vec::new() };
    let mut s = vec![0.0; n * n];
    let mut tmp = vec![0.0; n];
    for bi in 0..b {
        for h in 0..heads {
            s.iter_mut().for_each(|x| *x = 0.0);
            for t in 0..l {
                let off = (bi * l + t) * c + h * n;
                let ch = off..off + n;
                update_head(&mut s, &d[ch.clone()], &kt[ch.clone()], &i[ch.clone()], &v[ch.clone()], &kh[ch.clone()], &mut tmp);
                if s.iter().any(|x| !x.is_finite()) {
                    return Err(FrwkvError::NonFinite {
                        stage: "scan state".into(),
                        step: t,
                    });
                }
                for a in 0..n {
                    y[off + a] = s[a * n..(a + 1) * n].iter().zip(&r[ch.clone()]).map(|(x, y)| x * y).sum();
                }
                if keep {
                    let so = bi * per_seq + (h * (l + 1) + t + 1) * n * n;
                    states[so..so + n * n].copy_from_slice(&s);
                }
            }
        }
    }
    let f = Scan { heads, states };
    Ok(tape.custom(&inputs, Tensor::from_parts(shape, y), Box::new(f)))
}

struct Scan {
    heads: usize,
    /// `[B, H, L+1, D, D]`, entry 0 of each sequence is the zero initial state.
    states: Vec<f64>,
}

impl Function for Scan {
    fn name(&self) -> &'static str {
        "scan"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let shape = inputs[0].shape();
        let (b, l, c) = (shape[0], shape[1], shape[2]);
        let heads = self.heads;
        let n = c / heads;
        let [r, kt, kh, v, d, i] = [0, 1, 2, 3, 4, 5].map(|j| inputs[j].data());
        let mut gr = vec![0.0; b * l * c];
        let mut gkt = vec![0.0; b * l * c];
        let mut gkh = vec![0.0; b * l * c];
        let mut gv = vec![0.0; b * l * c];
        let mut gd = vec![0.0; b * l * c];
        let mut gi = vec![0.0; b * l * c];
        let per_seq = heads * (l + 1) * n * n;
        let mut ds = vec![0.0; n * n];
        let mut ds_prev = vec![0.0; n * n];
        let mut tmp = vec![0.0; n];
        let mut u = vec![0.0; n];
        for bi in 0..b {
            for h in 0..heads {
                ds.iter_mut().for_each(|x| *x = 0.0);
                for t in (0..l).rev() {
                    let off = (bi * l + t) * c + h * n;
                    let base = bi * per_seq + h * (l + 1) * n * n;
                    let s_t = &self.states[base + (t + 1) * n * n..base + (t + 2) * n * n];
                    let s_p = &self.states[base + t * n * n..base + (t + 1) * n * n];
                    let dy = &grad[off..off + n];
                    let rr = &r[off..off + n];

                    // y = S_t r
                    for cc in 0..n {
                        gr[off + cc] = (0..n).map(|a| s_t[a * n + cc] * dy[a]).sum();
                    }
                    for a in 0..n {
                        for cc in 0..n {
                            ds[a * n + cc] += dy[a] * rr[cc];
                        }
                    }

                    // S_t = (Diag(d) − k̃ iᵀ) S_p + v k̂ᵀ
                    let (dd, kk, ii, vv, kkh) = (&d[off..off + n], &kt[off..off + n], &i[off..off + n], &v[off..off + n], &kh[off..off + n]);
                    for cc in 0..n {
                        tmp[cc] = (0..n).map(|e| ii[e] * s_p[e * n + cc]).sum();
                        u[cc] = (0..n).map(|a| kk[a] * ds[a * n + cc]).sum();
                    }
                    for a in 0..n {
                        let row = &ds[a * n..(a + 1) * n];
                        gv[off + a] = row.iter().zip(kkh).map(|(x, y)| x * y).sum();
                        gd[off + a] = row.iter().zip(&s_p[a * n..(a + 1) * n]).map(|(x, y)| x * y).sum();
                        gkt[off + a] = -row.iter().zip(&tmp).map(|(x, y)| x * y).sum::<f64>();
                    }
                    for cc in 0..n {
                        gkh[off + cc] = (0..n).map(|a| ds[a * n + cc] * vv[a]).sum();
                    }
                    for e in 0..n {
                        gi[off + e] = -s_p[e * n..(e + 1) * n].iter().zip(&u).map(|(x, y)| x * y).sum::<f64>();
                        for cc in 0..n {
                            ds_prev[e * n + cc] = dd[e] * ds[e * n + cc] - ii[e] * u[cc];
                        }
                    }
                    std::mem::swap(&mut ds, &mut ds_prev);
                }
            }
        }
        vec![Some(gr), Some(gkt), Some(gkh), Some(gv), Some(gd), Some(gi)]
    }
}
