//! Hashed weight sharing: `y_i = sum_j w[idx(i, j)] x_j`.
//!
//! The index table is sampled uniformly over the real weights once at
//! construction and stored as fixed metadata; only the real weights are
//! trainable (and counted). Applying the operator uses the full virtual
//! matrix, so its mult-add cost equals the dense baseline.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linop::{FixedData, OperatorSpec, ParamStore};
use crate::mat::{matmul_nn, matmul_nt, matmul_tn};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

use super::{segments_from_lens, uniform_fan_in};

pub(super) fn validate(spec: &OperatorSpec, n_real: u64) -> Result<()> {
    let n_virtual = (spec.n_out * spec.n_in) as u64;
    if n_real < 1 || n_real > n_virtual {
        return Err(Error::Spec(format!(
            "n_real {n_real} outside [1, {n_virtual}] for {}x{}",
            spec.n_out, spec.n_in
        )));
    }
    Ok(())
}

pub(super) fn init(
    spec: &OperatorSpec,
    n_real: u64,
    rng: &mut ChaCha8Rng,
    table_rng: &mut ChaCha8Rng,
) -> ParamStore {
    let n_virtual = spec.n_out * spec.n_in;
    let table: Vec<u32> = (0..n_virtual)
        .map(|_| table_rng.random_range(0..n_real) as u32)
        .collect();
    init_with_table_impl(spec, n_real, table, rng)
}

pub(super) fn init_with_table(
    spec: &OperatorSpec,
    table: Vec<u32>,
    rng: &mut ChaCha8Rng,
) -> ParamStore {
    let n_real = match spec.family {
        crate::linop::Family::HashedNet { n_real } => n_real,
        _ => unreachable!("hashed table for non-hashed spec"),
    };
    init_with_table_impl(spec, n_real, table, rng)
}

fn init_with_table_impl(
    spec: &OperatorSpec,
    n_real: u64,
    table: Vec<u32>,
    rng: &mut ChaCha8Rng,
) -> ParamStore {
    let w = uniform_fan_in(rng, n_real as usize, spec.n_in);
    ParamStore::new(
        w,
        segments_from_lens(&[("w", n_real as usize)]),
        FixedData::HashIndex(table),
    )
}

fn virtual_matrix(spec: &OperatorSpec, params: &ParamStore) -> Vec<f64> {
    let table = params.hash_table().expect("hashed operator has a table");
    let w = params.flat();
    let mut v = vec![0.0; spec.n_out * spec.n_in];
    for (slot, &k) in v.iter_mut().zip(table) {
        *slot = w[k as usize];
    }
    v
}

pub(super) fn apply_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    let v = virtual_matrix(spec, params);
    let mut out = vec![0.0; batch * spec.n_out];
    matmul_nt(x, batch, spec.n_in, &v, spec.n_out, &mut out);
    out
}

pub(super) fn materialize(spec: &OperatorSpec, params: &ParamStore) -> DenseTensor {
    DenseTensor::from_raw(vec![spec.n_out, spec.n_in], virtual_matrix(spec, params))
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
    let table = params.hash_table().expect("hashed operator has a table");

    // virtual-matrix gradient, then accumulate onto the tied real weights
    let mut g = vec![0.0; n_out * n_in];
    matmul_tn(upstream, batch, n_out, x, n_in, &mut g);
    let mut dw = vec![0.0; params.len()];
    for (&k, &gv) in table.iter().zip(&g) {
        dw[k as usize] += gv;
    }

    let dx = want_input.then(|| {
        let v = virtual_matrix(spec, params);
        let mut dx = vec![0.0; batch * n_in];
        matmul_nn(upstream, batch, n_out, &v, n_in, &mut dx);
        dx
    });
    (dw, dx)
}
