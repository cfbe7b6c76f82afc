//! Property tests for the structural invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use sellkit::budget::log_midpoint;
use sellkit::kernels::{dct2, idct2, reshape3, riffle, riffle_inverse};
use sellkit::{sgd_step, Family, OperatorSpec};

fn finite_signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-100.0..100.0f64, len..=len)
}

proptest! {
    #[test]
    fn riffle_roundtrips(half in 1usize..128, scale in 1.0..10.0f64) {
        let n = 2 * half;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * scale).collect();
        let r = riffle(&x).unwrap();
        prop_assert_eq!(riffle_inverse(&r).unwrap(), x.clone());

        // a permutation preserves the multiset
        let mut a = x;
        let mut b = r;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dct_roundtrips_any_length(x in (1usize..96).prop_flat_map(finite_signal)) {
        let max = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let back = idct2(&dct2(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10 * max);
        }
    }

    #[test]
    fn dct_preserves_energy(x in (2usize..64).prop_flat_map(finite_signal)) {
        // orthonormal transforms are isometries
        let y = dct2(&x).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ey: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!((ex - ey).abs() <= 1e-9 * ex.max(1.0));
    }

    #[test]
    fn reshape3_factorises_exactly(n_out in 1usize..200, n_in in 1usize..200) {
        prop_assume!(n_out * n_in >= 8);
        let r = reshape3(n_out, n_in).unwrap();
        prop_assert_eq!(r.dims.iter().product::<usize>(), n_out * n_in);
        if !r.degenerate {
            prop_assert!(r.dims.iter().all(|&d| d >= 2));
            // the middle factor is the largest, outer pair ascending
            prop_assert!(r.dims[1] >= r.dims[0] && r.dims[1] >= r.dims[2]);
            prop_assert!(r.dims[0] <= r.dims[2]);
        }
    }

    #[test]
    fn spec_json_roundtrip(
        n_half in 1usize..24,
        seed in any::<u64>(),
        pick in 0usize..6,
        knob in 1usize..8,
    ) {
        let n = 2 * n_half;
        let family = match pick {
            0 => Family::Dense {},
            1 => Family::Acdc { layers: knob },
            2 => Family::TensorTrain { tt_rank: knob },
            3 => Family::RankFactorised { d_bn: knob.min(n) },
            4 => Family::HashedNet { n_real: knob as u64 },
            _ => Family::ShuffleLinear { groups: if n % 4 == 0 { 4 } else { 2 } },
        };
        prop_assume!(n * n >= 8);
        let spec = OperatorSpec::new(family, n, n, seed);
        prop_assume!(spec.is_ok());
        let spec = spec.unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: OperatorSpec = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn sgd_without_momentum_and_decay_is_plain_descent(
        p0 in vec(-10.0..10.0f64, 1..20),
        lr in 1e-4..1.0f64,
    ) {
        let grads: Vec<f64> = p0.iter().map(|v| v * 0.5 + 1.0).collect();
        let mut p = p0.clone();
        let mut v = vec![0.0; p.len()];
        sgd_step(&mut p, &grads, &mut v, lr, 0.0, 0.0).unwrap();
        for ((after, before), g) in p.iter().zip(&p0).zip(&grads) {
            prop_assert!((after - (before - lr * g)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_midpoint_squares_to_product(a in 1.0..1e9f64, k in 1.001..1e3f64) {
        let b = a * k;
        let m = log_midpoint(a, b);
        prop_assert!((m * m - a * b).abs() / (a * b) < 1e-12);
    }
}
