mod common;

use common::{rng, uniform};
use frwkv::revin::{instance_stats, revin_denormalize, revin_normalize, REVIN_EPS};
use frwkv::Tensor;
use proptest::prelude::*;

fn unit(n: usize) -> (Tensor, Tensor) {
    (Tensor::ones(&[n]), Tensor::zeros(&[n]))
}

#[test]
fn normalized_rows_have_zero_mean_and_eps_shrunk_std() {
    let x = uniform(&[4, 3, 96], -10.0, 10.0, &mut rng(1));
    let (g, b) = unit(3);
    let (z, _) = revin_normalize(&x, &g, &b).unwrap();
    for (row, zr) in x.data().chunks(96).zip(z.data().chunks(96)) {
        let m = row.iter().sum::<f64>() / 96.0;
        let var = row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 96.0;
        let zm = zr.iter().sum::<f64>() / 96.0;
        let zs = (zr.iter().map(|v| (v - zm).powi(2)).sum::<f64>() / 96.0).sqrt();
        assert!(zm.abs() < 1e-10);
        // the eps inside the root shrinks the spread by exactly this factor
        assert!((zs - (var / (var + REVIN_EPS)).sqrt()).abs() < 1e-10);
    }
}

#[test]
fn permuting_variables_permutes_stats() {
    let x = uniform(&[2, 3, 16], -5.0, 5.0, &mut rng(2));
    let perm = [2, 0, 1];
    let mut y = x.clone();
    for b in 0..2 {
        for (dst, &src) in perm.iter().enumerate() {
            for t in 0..16 {
                y.set(&[b, dst, t], x.get(&[b, src, t]));
            }
        }
    }
    let (mx, sx) = instance_stats(&x).unwrap();
    let (my, sy) = instance_stats(&y).unwrap();
    for b in 0..2 {
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(my.get(&[b, dst]), mx.get(&[b, src]));
            assert_eq!(sy.get(&[b, dst]), sx.get(&[b, src]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip_with_random_affine(
        vals in prop::collection::vec(-50.0f64..50.0, 2 * 12),
        gamma in prop::collection::vec(prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], 2),
        beta in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let x = Tensor::new(&[1, 2, 12], vals).unwrap();
        let (z, stats) = revin_normalize(&x, &Tensor::from_vec(gamma), &Tensor::from_vec(beta)).unwrap();
        let back = revin_denormalize(&z, &stats).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-9);
    }

    /// Exact form of equivariance under `c·X + d`: the eps term scales with
    /// `1/c²`.
    #[test]
    fn affine_input_change_is_absorbed(
        vals in prop::collection::vec(-5.0f64..5.0, 16),
        c in 0.1f64..10.0,
        d in -100.0f64..100.0,
    ) {
        let x = Tensor::new(&[1, 1, 16], vals).unwrap();
        let y = Tensor::new(&[1, 1, 16], x.data().iter().map(|v| c * v + d).collect()).unwrap();
        let (g, b) = unit(1);
        let (zx, _) = revin_normalize(&x, &g, &b).unwrap();
        let (zy, _) = revin_normalize(&y, &g, &b).unwrap();
        let m = x.data().iter().sum::<f64>() / 16.0;
        let var = x.data().iter().map(|v| (v - m).powi(2)).sum::<f64>() / 16.0;
        let ratio = ((var + REVIN_EPS) / (var + REVIN_EPS / (c * c))).sqrt();
        for (a, bb) in zx.data().iter().zip(zy.data()) {
            prop_assert!((a * ratio - bb).abs() < 1e-9);
        }
    }

    /// With variance well above eps the plain statement holds to 1e-9.
    #[test]
    fn scale_equivariance_for_spread_out_inputs(
        vals in prop::collection::vec(-1e3f64..1e3, 16),
        c in 1.0f64..10.0,
        d in -100.0f64..100.0,
    ) {
        let x = Tensor::new(&[1, 1, 16], vals).unwrap();
        let m = x.data().iter().sum::<f64>() / 16.0;
        let var = x.data().iter().map(|v| (v - m).powi(2)).sum::<f64>() / 16.0;
        prop_assume!(var > 1e4);
        let y = Tensor::new(&[1, 1, 16], x.data().iter().map(|v| c * v + d).collect()).unwrap();
        let (g, b) = unit(1);
        let (zx, _) = revin_normalize(&x, &g, &b).unwrap();
        let (zy, _) = revin_normalize(&y, &g, &b).unwrap();
        prop_assert!(zx.max_abs_diff(&zy) < 1e-9);
    }
}
