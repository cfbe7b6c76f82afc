//! Tensor-train operator: the weight matrix reshaped to three near-equal
//! dims and stored as cores `G0: (1, d0, r)`, `G1: (r, d1, r)`,
//! `G2: (r, d2, 1)` with boundary ranks 1.
//!
//! Entries reconstruct as `A(i0, i1, i2) = G0(i0) G1(i1) G2(i2)`; the dense
//! matrix is the row-major reshape of `A`. Application materialises the
//! matrix first and backpropagation runs through the reconstruction.

use rand_chacha::ChaCha8Rng;

use crate::linop::{OperatorSpec, ParamStore};
use crate::mat::{matmul_nn, matmul_tn};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

use super::{normal, segments_from_lens, store, tt_dims};

pub(super) fn validate(spec: &OperatorSpec, tt_rank: usize) -> Result<()> {
    if tt_rank == 0 {
        return Err(Error::Spec("tt_rank must be >= 1".into()));
    }
    crate::kernels::reshape3(spec.n_out, spec.n_in)?;
    Ok(())
}

pub(super) fn init(spec: &OperatorSpec, tt_rank: usize, rng: &mut ChaCha8Rng) -> ParamStore {
    let [d0, d1, d2] = tt_dims(spec);
    let r = tt_rank;
    // entry variance of the reconstruction is ~ r^2 sigma^6; match 2/(n_in+n_out)
    let target = 2.0 / (spec.n_in + spec.n_out) as f64;
    let sigma = (target / (r * r) as f64).powf(1.0 / 6.0);
    let lens = [d0 * r, r * d1 * r, r * d2];
    let mut flat = Vec::with_capacity(lens.iter().sum());
    for len in lens {
        flat.extend(normal(rng, len, sigma));
    }
    store(
        flat,
        segments_from_lens(&[("G0", lens[0]), ("G1", lens[1]), ("G2", lens[2])]),
    )
}

/// Contraction of the first two cores: `T12[i0, i1, b] = sum_a G0[i0, a] G1[a, i1, b]`.
fn contract_front(g0: &[f64], g1: &[f64], d0: usize, d1: usize, r: usize) -> Vec<f64> {
    // g0 is (d0, r) row-major, g1 is (r, d1, r) i.e. (r, d1*r) row-major
    let mut t12 = vec![0.0; d0 * d1 * r];
    matmul_nn(g0, d0, r, g1, d1 * r, &mut t12);
    t12
}

pub(super) fn materialize(spec: &OperatorSpec, params: &ParamStore, tt_rank: usize) -> DenseTensor {
    let [d0, d1, d2] = tt_dims(spec);
    let r = tt_rank;
    let (g0, g1, g2) = (params.seg(0), params.seg(1), params.seg(2));
    let t12 = contract_front(g0, g1, d0, d1, r);
    // A[(i0, i1), i2] = sum_b T12[(i0, i1), b] G2[b, i2]
    let mut a = vec![0.0; d0 * d1 * d2];
    matmul_nn(&t12, d0 * d1, r, g2, d2, &mut a);
    DenseTensor::from_raw(vec![spec.n_out, spec.n_in], a)
}

pub(super) fn grad_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    tt_rank: usize,
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let (n_out, n_in) = (spec.n_out, spec.n_in);
    let [d0, d1, d2] = tt_dims(spec);
    let r = tt_rank;
    let (g0, g1, g2) = (params.seg(0), params.seg(1), params.seg(2));

    // gradient w.r.t. the materialised matrix; its row-major flat layout is
    // exactly the (d0, d1, d2) tensor layout
    let mut g = vec![0.0; n_out * n_in];
    matmul_tn(upstream, batch, n_out, x, n_in, &mut g);

    let mut grads = vec![0.0; params.len()];
    {
        let (dg0, rest) = grads.split_at_mut(d0 * r);
        let (dg1, dg2) = rest.split_at_mut(r * d1 * r);

        // dG2[b, i2] = sum_{i0,i1} g[(i0,i1), i2] T12[(i0,i1), b]
        let t12 = contract_front(g0, g1, d0, d1, r);
        matmul_tn(&t12, d0 * d1, r, &g, d2, dg2);

        // H[(i0, i1), b] = sum_{i2} g[(i0,i1), i2] G2[b, i2]
        let mut h = vec![0.0; d0 * d1 * r];
        crate::mat::matmul_nt(&g, d0 * d1, d2, g2, r, &mut h);

        // dG0[i0, a] = sum_{i1, b} H[i0, (i1, b)] G1[a, (i1, b)]
        crate::mat::matmul_nt(&h, d0, d1 * r, g1, r, dg0);

        // dG1[a, (i1, b)] = sum_{i0} G0[i0, a] H[i0, (i1, b)]
        matmul_tn(g0, d0, r, &h, d1 * r, dg1);
    }

    let dx = want_input.then(|| {
        let m = materialize(spec, params, tt_rank);
        let mut dx = vec![0.0; batch * n_in];
        matmul_nn(upstream, batch, n_out, m.as_slice(), n_in, &mut dx);
        dx
    });
    (grads, dx)
}
