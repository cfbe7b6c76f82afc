//! Tucker-decomposed operator: a low-rank core expanded by per-mode factors,
//! `A = G x0 U0 x1 U1 x2 U2`, over the 3-way reshape of the weight matrix.
//!
//! Factors are stored as `U_k: (d_k, R_k)` so the k-mode product expands the
//! core's mode `k` up to the full dimension. As with tensor-train, the
//! operator materialises the matrix and gradients flow through the
//! reconstruction.

use rand_chacha::ChaCha8Rng;

use crate::kernels::kmode_product;
use crate::linop::{OperatorSpec, ParamStore};
use crate::mat::{matmul_nn, matmul_nt, matmul_tn};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

use super::{normal, segments_from_lens, store, tt_dims};

pub(super) fn validate(spec: &OperatorSpec, core_ranks: &[usize; 3]) -> Result<()> {
    let dims = crate::kernels::reshape3(spec.n_out, spec.n_in)?.dims;
    for (k, (&r, &d)) in core_ranks.iter().zip(&dims).enumerate() {
        if r < 1 || r > d {
            return Err(Error::Spec(format!(
                "core rank {r} outside [1, {d}] on mode {k} (dims {dims:?})"
            )));
        }
    }
    Ok(())
}

pub(super) fn init(spec: &OperatorSpec, core_ranks: &[usize; 3], rng: &mut ChaCha8Rng) -> ParamStore {
    let [d0, d1, d2] = tt_dims(spec);
    let [r0, r1, r2] = *core_ranks;
    // reconstruction entries sum r0*r1*r2 products of four factors
    let target = 2.0 / (spec.n_in + spec.n_out) as f64;
    let sigma = (target / (r0 * r1 * r2) as f64).powf(1.0 / 8.0);
    let lens = [r0 * r1 * r2, d0 * r0, d1 * r1, d2 * r2];
    let mut flat = Vec::with_capacity(lens.iter().sum());
    for len in lens {
        flat.extend(normal(rng, len, sigma));
    }
    store(
        flat,
        segments_from_lens(&[("core", lens[0]), ("U0", lens[1]), ("U1", lens[2]), ("U2", lens[3])]),
    )
}

fn factor(params: &ParamStore, k: usize, d: usize, r: usize) -> DenseTensor {
    DenseTensor::from_raw(vec![d, r], params.seg(1 + k).to_vec())
}

fn factor_t(params: &ParamStore, k: usize, d: usize, r: usize) -> DenseTensor {
    let u = params.seg(1 + k);
    let mut t = vec![0.0; r * d];
    for i in 0..d {
        for j in 0..r {
            t[j * d + i] = u[i * r + j];
        }
    }
    DenseTensor::from_raw(vec![r, d], t)
}

fn core_tensor(params: &ParamStore, ranks: &[usize; 3]) -> DenseTensor {
    DenseTensor::from_raw(ranks.to_vec(), params.seg(0).to_vec())
}

pub(super) fn materialize(
    spec: &OperatorSpec,
    params: &ParamStore,
    core_ranks: &[usize; 3],
) -> DenseTensor {
    let dims = tt_dims(spec);
    let [r0, r1, r2] = *core_ranks;
    let mut t = core_tensor(params, core_ranks);
    for (k, (&d, &r)) in dims.iter().zip(&[r0, r1, r2]).enumerate() {
        let u = factor(params, k, d, r);
        t = kmode_product(&t, &u, k).expect("validated shapes");
    }
    t.reshape(vec![spec.n_out, spec.n_in]).expect("dims multiply out")
}

/// Mode-k unfolding of a rank-3 tensor: rows indexed by mode k, columns by
/// the remaining modes in their original order.
fn unfold3(t: &DenseTensor, k: usize) -> Vec<f64> {
    let s = t.shape();
    let (a, b, c) = (s[0], s[1], s[2]);
    let src = t.as_slice();
    match k {
        0 => src.to_vec(),
        1 => {
            let mut out = vec![0.0; a * b * c];
            for i0 in 0..a {
                for i1 in 0..b {
                    for i2 in 0..c {
                        out[i1 * (a * c) + i0 * c + i2] = src[(i0 * b + i1) * c + i2];
                    }
                }
            }
            out
        }
        2 => {
            let mut out = vec![0.0; a * b * c];
            for i0 in 0..a {
                for i1 in 0..b {
                    for i2 in 0..c {
                        out[i2 * (a * b) + i0 * b + i1] = src[(i0 * b + i1) * c + i2];
                    }
                }
            }
            out
        }
        _ => unreachable!("rank-3 tensor"),
    }
}

pub(super) fn grad_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    core_ranks: &[usize; 3],
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let (n_out, n_in) = (spec.n_out, spec.n_in);
    let dims = tt_dims(spec);
    let ranks = *core_ranks;

    let mut gm = vec![0.0; n_out * n_in];
    matmul_tn(upstream, batch, n_out, x, n_in, &mut gm);
    let g = DenseTensor::from_raw(dims.to_vec(), gm);

    let mut grads = vec![0.0; params.len()];

    // dCore = g contracted against every factor transpose
    let mut dcore = g.clone();
    for k in 0..3 {
        let ut = factor_t(params, k, dims[k], ranks[k]);
        dcore = kmode_product(&dcore, &ut, k).expect("validated shapes");
    }
    let core_len = ranks.iter().product::<usize>();
    grads[..core_len].copy_from_slice(dcore.as_slice());

    // dU_k = unfold_k(g) * unfold_k(core expanded on the other modes)^T
    let core = core_tensor(params, core_ranks);
    let mut offset = core_len;
    for k in 0..3 {
        let mut b = core.clone();
        for j in 0..3 {
            if j != k {
                let u = factor(params, j, dims[j], ranks[j]);
                b = kmode_product(&b, &u, j).expect("validated shapes");
            }
        }
        let g_unf = unfold3(&g, k);
        let b_unf = unfold3(&b, k);
        let rest: usize = (0..3).filter(|&j| j != k).map(|j| dims[j]).product();
        let len = dims[k] * ranks[k];
        matmul_nt(&g_unf, dims[k], rest, &b_unf, ranks[k], &mut grads[offset..offset + len]);
        offset += len;
    }

    let dx = want_input.then(|| {
        let m = materialize(spec, params, core_ranks);
        let mut dx = vec![0.0; batch * n_in];
        matmul_nn(upstream, batch, n_out, m.as_slice(), n_in, &mut dx);
        dx
    });
    (grads, dx)
}
