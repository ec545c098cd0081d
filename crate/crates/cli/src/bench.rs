//! Runtime scaling of the recurrent encoder scan.

use std::time::Instant;

use anyhow::Result;
use frwkv::encoder::{EncoderDims, EncoderLayer};
use frwkv::params::ParamStore;
use frwkv::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::BenchConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub seq_len: usize,
    pub median_seconds: f64,
    /// Floats in the recurrent state.
    pub state_floats: usize,
    pub steps: usize,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of log runtime against log length.
    pub alpha: f64,
    /// Runtime ratio of the two longest lengths.
    pub last_ratio: f64,
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Deterministic smooth input rows; the values do not affect the work done.
fn input(len: usize, c: usize) -> Tensor {
    let data = (0..len * c).map(|k| ((k / c) as f64 * 0.37 + (k % c) as f64 * 1.3).sin()).collect();
    Tensor::new(&[len, c], data).expect("shape matches")
}

/// Times one encoder block's sequential forward for every length, on the
/// calling thread.
pub fn bench_scaling(d_model: usize, heads: usize, seed: u64, cfg: &BenchConfig) -> Result<ScalingReport> {
    let dims = EncoderDims::new(d_model, heads)?;
    let mut store = ParamStore::new();
    let layer = EncoderLayer::new(&mut store, "bench", dims, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut rows = Vec::new();
    for &len in &cfg.lengths {
        let z = input(len, d_model);
        for _ in 0..cfg.warmup {
            std::hint::black_box(layer.forward_sequence(&store, &z)?);
        }
        let mut times = Vec::with_capacity(cfg.repeats);
        let mut stats = None;
        for _ in 0..cfg.repeats {
            let start = Instant::now();
            let out = std::hint::black_box(layer.forward_sequence(&store, &z)?);
            times.push(start.elapsed().as_secs_f64());
            stats = Some(out.1);
        }
        let stats = stats.expect("at least one repeat");
        rows.push(ScalingRow {
            seq_len: len,
            median_seconds: median(&mut times),
            state_floats: stats.state_len,
            steps: stats.steps,
            flops: stats.flops,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.seq_len as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_seconds).collect();
    let alpha = if rows.len() >= 2 { fit_exponent(&xs, &ys) } else { f64::NAN };
    let last_ratio = match rows.as_slice() {
        [.., a, b] => b.median_seconds / a.median_seconds,
        _ => f64::NAN,
    };
    Ok(ScalingReport { rows, alpha, last_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_of_exact_power_law() {
        let xs = [256.0, 512.0, 1024.0, 2048.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3e-7 * x.powf(1.5)).collect();
        assert!((fit_exponent(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn state_size_is_length_independent() {
        let cfg = BenchConfig {
            lengths: vec![8, 16, 32],
            repeats: 5,
            warmup: 0,
        };
        let r = bench_scaling(8, 2, 0, &cfg).unwrap();
        assert!(r.rows.iter().all(|row| row.state_floats == 2 * 4 * 4));
        assert_eq!(r.rows.iter().map(|row| row.steps).collect::<Vec<_>>(), vec![8, 16, 32]);
    }
}
