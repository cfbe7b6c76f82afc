//! Rank-factorised bottleneck: `y = W2 (W1 x)`.

use rand_chacha::ChaCha8Rng;

use crate::linop::{OperatorSpec, ParamStore};
use crate::mat::{matmul_nn, matmul_nt, matmul_tn};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

use super::{segments_from_lens, store, uniform_fan_in};

pub(super) fn validate(spec: &OperatorSpec, d_bn: usize) -> Result<()> {
    let max = spec.n_in.min(spec.n_out);
    if d_bn < 1 || d_bn > max {
        return Err(Error::Spec(format!(
            "bottleneck width {d_bn} outside [1, {max}] for {}x{}",
            spec.n_out, spec.n_in
        )));
    }
    Ok(())
}

pub(super) fn init(spec: &OperatorSpec, d_bn: usize, rng: &mut ChaCha8Rng) -> ParamStore {
    let w1_len = d_bn * spec.n_in;
    let w2_len = spec.n_out * d_bn;
    let mut flat = uniform_fan_in(rng, w1_len, spec.n_in);
    flat.extend(uniform_fan_in(rng, w2_len, d_bn));
    store(flat, segments_from_lens(&[("W1", w1_len), ("W2", w2_len)]))
}

pub(super) fn apply_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    d_bn: usize,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    let (w1, w2) = (params.seg(0), params.seg(1));
    let mut z = vec![0.0; batch * d_bn];
    matmul_nt(x, batch, spec.n_in, w1, d_bn, &mut z);
    let mut y = vec![0.0; batch * spec.n_out];
    matmul_nt(&z, batch, d_bn, w2, spec.n_out, &mut y);
    y
}

pub(super) fn materialize(spec: &OperatorSpec, params: &ParamStore, d_bn: usize) -> DenseTensor {
    let (w1, w2) = (params.seg(0), params.seg(1));
    let mut m = vec![0.0; spec.n_out * spec.n_in];
    matmul_nn(w2, spec.n_out, d_bn, w1, spec.n_in, &mut m);
    DenseTensor::from_raw(vec![spec.n_out, spec.n_in], m)
}

pub(super) fn grad_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    d_bn: usize,
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let (n_out, n_in) = (spec.n_out, spec.n_in);
    let (w1, w2) = (params.seg(0), params.seg(1));

    // forward intermediate z = x W1^T
    let mut z = vec![0.0; batch * d_bn];
    matmul_nt(x, batch, n_in, w1, d_bn, &mut z);

    let mut grads = vec![0.0; params.len()];
    let (dw1, dw2) = grads.split_at_mut(d_bn * n_in);
    matmul_tn(upstream, batch, n_out, &z, d_bn, dw2);

    let mut dz = vec![0.0; batch * d_bn];
    matmul_nn(upstream, batch, n_out, w2, d_bn, &mut dz);
    matmul_tn(&dz, batch, d_bn, x, n_in, dw1);

    let dx = want_input.then(|| {
        let mut dx = vec![0.0; batch * n_in];
        matmul_nn(&dz, batch, d_bn, w1, n_in, &mut dx);
        dx
    });
    (grads, dx)
}
