//! Linearised shuffle unit: `y = B2 P B1 x`.
//!
//! `B1` and `B2` are block-diagonal with `groups` square blocks; `P` is the
//! riffle shuffle mixing information between the groups.

use rand_chacha::ChaCha8Rng;

use crate::kernels::{riffle_into, riffle_inverse_into};
use crate::linop::{OperatorSpec, ParamStore};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

use super::{segments_from_lens, store, uniform_fan_in};

pub(super) fn validate(spec: &OperatorSpec, groups: usize) -> Result<()> {
    let n = spec.n_out;
    if spec.n_in != n {
        return Err(Error::Spec(format!(
            "shuffle-linear operators are square, got {}x{}",
            n, spec.n_in
        )));
    }
    if n % 2 != 0 {
        return Err(Error::Spec(format!("riffle shuffle needs even width, got {n}")));
    }
    if groups == 0 || n % groups != 0 {
        return Err(Error::Spec(format!("groups {groups} must divide width {n}")));
    }
    Ok(())
}

pub(super) fn init(spec: &OperatorSpec, groups: usize, rng: &mut ChaCha8Rng) -> ParamStore {
    let n = spec.n_out;
    let block = n / groups;
    let len = groups * block * block;
    let mut flat = uniform_fan_in(rng, len, block);
    flat.extend(uniform_fan_in(rng, len, block));
    store(flat, segments_from_lens(&[("B1", len), ("B2", len)]))
}

/// Per-row block-diagonal product: `out[g*s + i] = sum_j blocks[g][i][j] * x[g*s + j]`.
fn block_apply(blocks: &[f64], groups: usize, block: usize, x: &[f64], out: &mut [f64]) {
    for g in 0..groups {
        let blk = &blocks[g * block * block..(g + 1) * block * block];
        let xs = &x[g * block..(g + 1) * block];
        let os = &mut out[g * block..(g + 1) * block];
        for (i, o) in os.iter_mut().enumerate() {
            let row = &blk[i * block..(i + 1) * block];
            let mut acc = 0.0;
            for j in 0..block {
                acc += row[j] * xs[j];
            }
            *o = acc;
        }
    }
}

/// Transposed per-row block product: `out[g*s + j] = sum_i blocks[g][i][j] * x[g*s + i]`.
fn block_apply_t(blocks: &[f64], groups: usize, block: usize, x: &[f64], out: &mut [f64]) {
    for g in 0..groups {
        let blk = &blocks[g * block * block..(g + 1) * block * block];
        let xs = &x[g * block..(g + 1) * block];
        let os = &mut out[g * block..(g + 1) * block];
        os.fill(0.0);
        for (i, &xv) in xs.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &blk[i * block..(i + 1) * block];
            for (o, &bv) in os.iter_mut().zip(row) {
                *o += xv * bv;
            }
        }
    }
}

pub(super) fn apply_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    groups: usize,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    let n = spec.n_out;
    let block = n / groups;
    let (b1, b2) = (params.seg(0), params.seg(1));
    let mut out = vec![0.0; batch * n];
    let mut z1 = vec![0.0; n];
    let mut z2 = vec![0.0; n];
    for b in 0..batch {
        let row = &x[b * n..(b + 1) * n];
        block_apply(b1, groups, block, row, &mut z1);
        riffle_into(&z1, &mut z2);
        block_apply(b2, groups, block, &z2, &mut out[b * n..(b + 1) * n]);
    }
    out
}

pub(super) fn grad_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    groups: usize,
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = spec.n_out;
    let block = n / groups;
    let seg_len = groups * block * block;
    let (b1, b2) = (params.seg(0), params.seg(1));

    let mut grads = vec![0.0; params.len()];
    let mut dx = want_input.then(|| vec![0.0; batch * n]);

    let mut z1 = vec![0.0; n];
    let mut z2 = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut dz1 = vec![0.0; n];
    for b in 0..batch {
        let row = &x[b * n..(b + 1) * n];
        let urow = &upstream[b * n..(b + 1) * n];
        block_apply(b1, groups, block, row, &mut z1);
        riffle_into(&z1, &mut z2);

        {
            let (db1, db2) = grads.split_at_mut(seg_len);
            // dB2[g][i][j] += u[g*s+i] * z2[g*s+j]
            for g in 0..groups {
                let dblk = &mut db2[g * block * block..(g + 1) * block * block];
                for i in 0..block {
                    let uv = urow[g * block + i];
                    if uv == 0.0 {
                        continue;
                    }
                    let drow = &mut dblk[i * block..(i + 1) * block];
                    let zs = &z2[g * block..(g + 1) * block];
                    for (d, &zv) in drow.iter_mut().zip(zs) {
                        *d += uv * zv;
                    }
                }
            }
            // back through B2 (transpose), the riffle, then accumulate dB1
            block_apply_t(b2, groups, block, urow, &mut du);
            riffle_inverse_into(&du, &mut dz1);
            for g in 0..groups {
                let dblk = &mut db1[g * block * block..(g + 1) * block * block];
                for i in 0..block {
                    let dv = dz1[g * block + i];
                    if dv == 0.0 {
                        continue;
                    }
                    let drow = &mut dblk[i * block..(i + 1) * block];
                    let xs = &row[g * block..(g + 1) * block];
                    for (d, &xv) in drow.iter_mut().zip(xs) {
                        *d += dv * xv;
                    }
                }
            }
        }
        if let Some(dx) = dx.as_mut() {
            block_apply_t(b1, groups, block, &dz1, &mut dx[b * n..(b + 1) * n]);
        }
    }
    (grads, dx)
}

/// Boolean reachability pattern of the materialised matrix: true where a
/// parameter path `B2 P B1` can produce a non-zero entry.
pub fn reachable_pattern(n: usize, groups: usize) -> DenseTensor {
    let block = n / groups;
    // column j feeds block g1 = j / block of B1; rows of that block are
    // riffled to positions P(g1*block + i); each lands in some block of B2
    // whose whole row range becomes reachable.
    let mut pattern = DenseTensor::zeros(vec![n, n]);
    let half = n / 2;
    for j in 0..n {
        let g1 = j / block;
        for i in 0..block {
            let pre = g1 * block + i;
            let post = if pre < half { 2 * pre } else { 2 * (pre - half) + 1 };
            let g2 = post / block;
            for r in g2 * block..(g2 + 1) * block {
                pattern.set2(r, j, 1.0);
            }
        }
    }
    pattern
}
