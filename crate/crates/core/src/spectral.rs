//! Real-input DFT along the last axis, its inverse with Hermitian
//! completion, and the matching differentiable tape operations.
//!
//! Both directions are evaluated as direct sums against a per-length
//! twiddle table. Sequence lengths here are at most a few hundred, where the
//! `O(T·F)` sum is cheap and exact enough that no fast path is needed.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use crate::autodiff::{Function, Tape, Var};
use crate::error::{FrwkvError, Result};
use crate::tensor::Tensor;

/// Number of non-redundant bins for a length-`t` real signal.
pub fn num_bins(t: usize) -> usize {
    t / 2 + 1
}

/// Half spectrum of a real signal: `F = ⌊T/2⌋ + 1` bins along the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub re: Tensor,
    pub im: Tensor,
    original_length: usize,
}

impl ComplexSpectrum {
    pub fn new(re: Tensor, im: Tensor, original_length: usize) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(FrwkvError::Dimension {
                op: "spectrum",
                lhs: re.shape().to_vec(),
                rhs: im.shape().to_vec(),
            });
        }
        let f = re.shape().last().copied().unwrap_or(0);
        if original_length < 2 || f != num_bins(original_length) {
            return Err(FrwkvError::contract(format!(
                "{f} bins are inconsistent with original length {original_length}"
            )));
        }
        Ok(Self { re, im, original_length })
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn bins(&self) -> usize {
        num_bins(self.original_length)
    }
}

/// Full-length spectrum produced by [`hermitian_complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct FullSpectrum {
    pub re: Tensor,
    pub im: Tensor,
}

struct Twiddles {
    t: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    fn new(t: usize) -> Self {
        let (cos, sin) = (0..t)
            .map(|m| {
                // quarter turns are exact
                if (4 * m) % t == 0 {
                    return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][4 * m / t];
                }
                let a = 2.0 * PI * m as f64 / t as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Self { t, cos, sin }
    }

    #[inline]
    fn at(&self, k: usize, n: usize) -> (f64, f64) {
        let m = (k * n) % self.t;
        (self.cos[m], self.sin[m])
    }

    fn forward(&self, x: &[f64], re: &mut [f64], im: &mut [f64]) {
        for k in 0..re.len() {
            let (mut sr, mut si) = (0.0, 0.0);
            for (n, &xn) in x.iter().enumerate() {
                let (c, s) = self.at(k, n);
                sr += xn * c;
                si -= xn * s;
            }
            re[k] = sr;
            im[k] = si;
        }
    }

    /// Weight of bin `k` in the real inverse: DC and Nyquist appear once,
    /// every other half-spectrum bin stands for itself and its mirror.
    fn weight(&self, k: usize) -> f64 {
        if k == 0 || (self.t % 2 == 0 && k == self.t / 2) {
            1.0
        } else {
            2.0
        }
    }

    fn self_mirrored(&self, k: usize) -> bool {
        k == 0 || (self.t % 2 == 0 && k == self.t / 2)
    }

    /// Inverse of the Hermitian-completed spectrum. Imaginary parts of the
    /// self-mirrored bins are projected out.
    fn inverse(&self, re: &[f64], im: &[f64], x: &mut [f64]) {
        let scale = 1.0 / self.t as f64;
        for (n, xn) in x.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..re.len() {
                let (c, s) = self.at(k, n);
                let imk = if self.self_mirrored(k) { 0.0 } else { im[k] };
                acc += self.weight(k) * (re[k] * c - imk * s);
            }
            *xn = acc * scale;
        }
    }
}

thread_local! {
    static TWIDDLES: RefCell<HashMap<usize, Rc<Twiddles>>> = RefCell::new(HashMap::new());
}

fn twiddles(t: usize) -> Rc<Twiddles> {
    TWIDDLES.with(|cache| cache.borrow_mut().entry(t).or_insert_with(|| Rc::new(Twiddles::new(t))).clone())
}

fn last_len(x: &Tensor) -> Result<usize> {
    x.shape()
        .last()
        .copied()
        .ok_or_else(|| FrwkvError::contract("spectral transform on a scalar"))
}

fn with_last(shape: &[usize], last: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    *s.last_mut().unwrap() = last;
    s
}

/// Real DFT along the last axis.
pub fn rfft(x: &Tensor) -> Result<ComplexSpectrum> {
    let t = last_len(x)?;
    if t < 2 {
        return Err(FrwkvError::contract(format!("rfft needs length >= 2, got {t}")));
    }
    let f = num_bins(t);
    let tw = twiddles(t);
    let rows = x.numel() / t;
    let (mut re, mut im) = (vec![0.0; rows * f], vec![0.0; rows * f]);
    for r in 0..rows {
        tw.forward(&x.data()[r * t..(r + 1) * t], &mut re[r * f..(r + 1) * f], &mut im[r * f..(r + 1) * f]);
    }
    let shape = with_last(x.shape(), f);
    Ok(ComplexSpectrum {
        re: Tensor::from_parts(shape.clone(), re),
        im: Tensor::from_parts(shape, im),
        original_length: t,
    })
}

/// Inverse real DFT along the last axis.
pub fn irfft(s: &ComplexSpectrum) -> Result<Tensor> {
    let t = s.original_length;
    let f = last_len(&s.re)?;
    if f != num_bins(t) || s.re.shape() != s.im.shape() {
        return Err(FrwkvError::contract(format!("{f} bins are inconsistent with original length {t}")));
    }
    let tw = twiddles(t);
    let rows = s.re.numel() / f;
    let mut out = vec![0.0; rows * t];
    for r in 0..rows {
        tw.inverse(
            &s.re.data()[r * f..(r + 1) * f],
            &s.im.data()[r * f..(r + 1) * f],
            &mut out[r * t..(r + 1) * t],
        );
    }
    Ok(Tensor::from_parts(with_last(s.re.shape(), t), out))
}

/// Extends a half spectrum to all `T` bins with `X[k] = conj(X[T−k])` for
/// `k ≥ F`.
pub fn hermitian_complete(s: &ComplexSpectrum) -> FullSpectrum {
    let t = s.original_length;
    let f = s.bins();
    let rows = s.re.numel() / f;
    let (mut re, mut im) = (vec![0.0; rows * t], vec![0.0; rows * t]);
    for r in 0..rows {
        let (sr, si) = (&s.re.data()[r * f..(r + 1) * f], &s.im.data()[r * f..(r + 1) * f]);
        for k in 0..t {
            let (a, b) = if k < f { (sr[k], si[k]) } else { (sr[t - k], -si[t - k]) };
            re[r * t + k] = a;
            im[r * t + k] = b;
        }
    }
    let shape = with_last(s.re.shape(), t);
    FullSpectrum {
        re: Tensor::from_parts(shape.clone(), re),
        im: Tensor::from_parts(shape, im),
    }
}

#[derive(Clone, Copy)]
enum Part {
    Re,
    Im,
}

struct RfftPart {
    part: Part,
    t: usize,
}

impl Function for RfftPart {
    fn name(&self) -> &'static str {
        match self.part {
            Part::Re => "rfft_re",
            Part::Im => "rfft_im",
        }
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (t, f) = (self.t, num_bins(self.t));
        let tw = twiddles(t);
        let rows = grad.len() / f;
        let mut gx = vec![0.0; rows * t];
        for r in 0..rows {
            let g = &grad[r * f..(r + 1) * f];
            for n in 0..t {
                let mut acc = 0.0;
                for (k, gk) in g.iter().enumerate() {
                    let (c, s) = tw.at(k, n);
                    acc += match self.part {
                        Part::Re => gk * c,
                        Part::Im => -gk * s,
                    };
                }
                gx[r * t + n] = acc;
            }
        }
        vec![Some(gx)]
    }
}

struct Irfft {
    t: usize,
}

impl Function for Irfft {
    fn name(&self) -> &'static str {
        "irfft"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (t, f) = (self.t, num_bins(self.t));
        let tw = twiddles(t);
        let rows = grad.len() / t;
        let (mut gre, mut gim) = (vec![0.0; rows * f], vec![0.0; rows * f]);
        let scale = 1.0 / t as f64;
        for r in 0..rows {
            let g = &grad[r * t..(r + 1) * t];
            for k in 0..f {
                let (mut a, mut b) = (0.0, 0.0);
                for (n, gn) in g.iter().enumerate() {
                    let (c, s) = tw.at(k, n);
                    a += gn * c;
                    b -= gn * s;
                }
                let w = tw.weight(k) * scale;
                gre[r * f + k] = w * a;
                gim[r * f + k] = if tw.self_mirrored(k) { 0.0 } else { w * b };
            }
        }
        vec![Some(gre), Some(gim)]
    }
}

/// Recorded [`rfft`] along the last axis; returns `(re, im)`.
pub fn rfft_tape(tape: &mut Tape, x: Var) -> Result<(Var, Var)> {
    let spec = rfft(tape.value(x))?;
    let t = spec.original_length;
    let re = tape.custom(&[x], spec.re, Box::new(RfftPart { part: Part::Re, t }));
    let im = tape.custom(&[x], spec.im, Box::new(RfftPart { part: Part::Im, t }));
    Ok((re, im))
}

/// Recorded [`irfft`] along the last axis back to length `t`.
pub fn irfft_tape(tape: &mut Tape, re: Var, im: Var, t: usize) -> Result<Var> {
    let spec = ComplexSpectrum::new(tape.value(re).clone(), tape.value(im).clone(), t)?;
    let out = irfft(&spec)?;
    Ok(tape.custom(&[re, im], out, Box::new(Irfft { t })))
}
