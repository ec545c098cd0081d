//! Direct O(T²) discrete Fourier sums.

use std::f64::consts::PI;

/// Non-redundant bins `0..=T/2` of `Σ_n x[n] e^{−2πikn/T}`.
pub fn dft(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let t = x.len();
    let f = t / 2 + 1;
    let mut re = vec![0.0; f];
    let mut im = vec![0.0; f];
    for k in 0..f {
        for (n, &v) in x.iter().enumerate() {
            let theta = 2.0 * PI * (k * n) as f64 / t as f64;
            re[k] += v * theta.cos();
            im[k] -= v * theta.sin();
        }
    }
    (re, im)
}

/// Real part of the full inverse sum after conjugate-symmetric extension of
/// the half spectrum to all `T` bins.
pub fn idft(re: &[f64], im: &[f64], t: usize) -> Vec<f64> {
    let bin = |k: usize| {
        if k < re.len() {
            (re[k], im[k])
        } else {
            (re[t - k], -im[t - k])
        }
    };
    (0..t)
        .map(|n| {
            let mut acc = 0.0;
            for k in 0..t {
                let (a, b) = bin(k);
                let theta = 2.0 * PI * (k * n) as f64 / t as f64;
                acc += a * theta.cos() - b * theta.sin();
            }
            acc / t as f64
        })
        .collect()
}
