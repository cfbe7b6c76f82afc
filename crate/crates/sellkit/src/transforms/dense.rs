//! Dense baseline: the unconstrained `n_out x n_in` matrix.

use rand_chacha::ChaCha8Rng;

use crate::linop::{OperatorSpec, ParamStore};
use crate::mat::{matmul_nn, matmul_nt, matmul_tn};
use crate::tensor::DenseTensor;

use super::{segments_from_lens, store, uniform_fan_in};

pub(super) fn init(spec: &OperatorSpec, rng: &mut ChaCha8Rng) -> ParamStore {
    let n = spec.n_out * spec.n_in;
    let flat = uniform_fan_in(rng, n, spec.n_in);
    store(flat, segments_from_lens(&[("W", n)]))
}

pub(super) fn apply_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; batch * spec.n_out];
    matmul_nt(x, batch, spec.n_in, params.flat(), spec.n_out, &mut out);
    out
}

pub(super) fn materialize(spec: &OperatorSpec, params: &ParamStore) -> DenseTensor {
    DenseTensor::from_raw(vec![spec.n_out, spec.n_in], params.flat().to_vec())
}

pub(super) fn grad_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let (n_out, n_in) = (spec.n_out, spec.n_in);
    let mut dw = vec![0.0; n_out * n_in];
    matmul_tn(upstream, batch, n_out, x, n_in, &mut dw);
    let dx = want_input.then(|| {
        let mut dx = vec![0.0; batch * n_in];
        matmul_nn(upstream, batch, n_out, params.flat(), n_in, &mut dx);
        dx
    });
    (dw, dx)
}
