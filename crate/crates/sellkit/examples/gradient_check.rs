//! Verify the analytic reverse-mode gradients of every operator family
//! against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sellkit::transforms::{
    build_acdc, build_dense, build_hashed, build_rf, build_shuffle_linear, build_tt, build_tucker,
};
use sellkit::{apply, grad, ParamStore};

fn main() -> sellkit::Result<()> {
    let ops = vec![
        build_dense(10, 8, 1)?,
        build_acdc(16, 2, 2)?,
        build_tt(12, 12, 3, 3)?,
        build_tucker(12, 12, 0.5, 4)?,
        build_rf(8, 10, 4, 5)?,
        build_hashed(10, 8, 11, 6)?,
        build_shuffle_linear(16, 4, 7)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-5;

    for (spec, params) in &ops {
        let x: Vec<f64> = (0..spec.n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> = (0..spec.n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (pg, _) = grad(spec, params, &x, &upstream)?;

        // scalar probe: L(theta) = <upstream, apply(x)>
        let loss = |p: &ParamStore| -> f64 {
            apply(spec, p, &x)
                .unwrap()
                .iter()
                .zip(&upstream)
                .map(|(y, u)| y * u)
                .sum()
        };
        let mut worst = 0.0f64;
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus.flat_mut()[k] += h;
            let mut minus = params.clone();
            minus.flat_mut()[k] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = fd.abs().max(pg[k].abs()).max(1.0);
            worst = worst.max((fd - pg[k]).abs() / denom);
        }
        println!(
            "{:<16} {:>4} parameters, max relative gradient error {worst:.2e}",
            spec.kind().to_string(),
            params.len()
        );
    }
    Ok(())
}
