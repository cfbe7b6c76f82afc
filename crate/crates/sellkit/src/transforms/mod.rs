//! Constructors and per-kind apply/materialize/count/grad logic for the
//! seven operator families.
//!
//! Parameter initialisation is deterministic: every builder derives all
//! randomness from the spec's seed via ChaCha8, stream 0 for trainable
//! values (in segment order) and stream 1 for fixed metadata such as the
//! hashed index table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::kernels::reshape3;
use crate::linop::{CostModel, Family, FixedData, MultAdds, OperatorSpec, ParamStore, Segment};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

mod acdc;
mod dense;
mod hashed;
mod rank_factorised;
mod shuffle;
mod tensor_train;
mod tucker;

pub use shuffle::reachable_pattern;

/// Mult-adds of an `n`-unit stack of `layers` diagonal-DCT layers under the
/// cost model. A pure cost formula: `n` need not be a constructible width.
pub fn acdc_multadds(n: u64, layers: u64, model: &CostModel) -> u64 {
    acdc::multadds(n, layers, model)
}

pub(crate) fn validate(spec: &OperatorSpec) -> Result<()> {
    match spec.family {
        Family::Dense {} => Ok(()),
        Family::Acdc { layers } => acdc::validate(spec, layers),
        Family::TensorTrain { tt_rank } => tensor_train::validate(spec, tt_rank),
        Family::Tucker { core_ranks } => tucker::validate(spec, &core_ranks),
        Family::RankFactorised { d_bn } => rank_factorised::validate(spec, d_bn),
        Family::HashedNet { n_real } => hashed::validate(spec, n_real),
        Family::ShuffleLinear { groups } => shuffle::validate(spec, groups),
    }
}

pub(crate) fn param_count_unchecked(spec: &OperatorSpec) -> u64 {
    let (n_out, n_in) = (spec.n_out as u64, spec.n_in as u64);
    match spec.family {
        Family::Dense {} => n_out * n_in,
        Family::Acdc { layers } => 2 * layers as u64 * n_out,
        Family::TensorTrain { tt_rank } => {
            let [d0, d1, d2] = tt_dims(spec);
            let r = tt_rank as u64;
            d0 as u64 * r + r * d1 as u64 * r + r * d2 as u64
        }
        Family::Tucker { core_ranks } => {
            let [d0, d1, d2] = tt_dims(spec);
            let [r0, r1, r2] = core_ranks.map(|r| r as u64);
            r0 * r1 * r2 + d0 as u64 * r0 + d1 as u64 * r1 + d2 as u64 * r2
        }
        Family::RankFactorised { d_bn } => d_bn as u64 * n_in + n_out * d_bn as u64,
        Family::HashedNet { n_real } => n_real,
        Family::ShuffleLinear { groups } => 2 * n_out * n_out / groups as u64,
    }
}

pub(crate) fn multadds_unchecked(spec: &OperatorSpec, model: &CostModel) -> MultAdds {
    let dense = spec.dense_params();
    match spec.family {
        Family::Dense {} | Family::HashedNet { .. } => MultAdds::Count(dense),
        Family::Acdc { layers } => {
            MultAdds::Count(acdc::multadds(spec.n_out as u64, layers as u64, model))
        }
        Family::RankFactorised { d_bn } => {
            MultAdds::Count(d_bn as u64 * (spec.n_in as u64 + spec.n_out as u64))
        }
        Family::ShuffleLinear { groups } => {
            MultAdds::Count(2 * spec.n_out as u64 * spec.n_out as u64 / groups as u64)
        }
        Family::TensorTrain { tt_rank } => {
            if model.materialized_tensor_apply {
                let [d0, d1, d2] = tt_dims(spec).map(|d| d as u64);
                let r = tt_rank as u64;
                MultAdds::Count(dense + d0 * d1 * r * r + d0 * d1 * d2 * r)
            } else {
                MultAdds::Unavailable
            }
        }
        Family::Tucker { core_ranks } => {
            if model.materialized_tensor_apply {
                let [d0, d1, d2] = tt_dims(spec).map(|d| d as u64);
                let [r0, r1, r2] = core_ranks.map(|r| r as u64);
                let chain = d0 * r0 * r1 * r2 + d0 * d1 * r1 * r2 + d0 * d1 * d2 * r2;
                MultAdds::Count(dense + chain)
            } else {
                MultAdds::Unavailable
            }
        }
    }
}

pub(crate) fn apply_batch_unchecked(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    match spec.family {
        Family::Dense {} => dense::apply_batch(spec, params, x, batch),
        Family::Acdc { layers } => acdc::apply_batch(spec, params, layers, x, batch),
        Family::TensorTrain { .. } | Family::Tucker { .. } => {
            // materialise-then-matvec: the decomposition stores the matrix,
            // it is not a fast-apply scheme
            let m = materialize_unchecked(spec, params);
            let mut out = vec![0.0; batch * spec.n_out];
            crate::mat::matmul_nt(x, batch, spec.n_in, m.as_slice(), spec.n_out, &mut out);
            out
        }
        Family::RankFactorised { d_bn } => rank_factorised::apply_batch(spec, params, d_bn, x, batch),
        Family::HashedNet { .. } => hashed::apply_batch(spec, params, x, batch),
        Family::ShuffleLinear { groups } => shuffle::apply_batch(spec, params, groups, x, batch),
    }
}

pub(crate) fn materialize_unchecked(spec: &OperatorSpec, params: &ParamStore) -> DenseTensor {
    match spec.family {
        Family::Dense {} => dense::materialize(spec, params),
        Family::Acdc { .. } => materialize_via_basis(spec, params),
        Family::TensorTrain { tt_rank } => tensor_train::materialize(spec, params, tt_rank),
        Family::Tucker { core_ranks } => tucker::materialize(spec, params, &core_ranks),
        Family::RankFactorised { d_bn } => rank_factorised::materialize(spec, params, d_bn),
        Family::HashedNet { .. } => hashed::materialize(spec, params),
        Family::ShuffleLinear { .. } => materialize_via_basis(spec, params),
    }
}

/// Reverse-mode gradients through one batched application.
///
/// `upstream` is `batch x n_out` row-major; returns gradients with the same
/// layout as `ParamStore::flat` and, when requested, `batch x n_in` input
/// gradients.
pub(crate) fn grad_batch_unchecked(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    match spec.family {
        Family::Dense {} => dense::grad_batch(spec, params, x, batch, upstream, want_input),
        Family::Acdc { layers } => acdc::grad_batch(spec, params, layers, x, batch, upstream, want_input),
        Family::TensorTrain { tt_rank } => {
            tensor_train::grad_batch(spec, params, tt_rank, x, batch, upstream, want_input)
        }
        Family::Tucker { core_ranks } => {
            tucker::grad_batch(spec, params, &core_ranks, x, batch, upstream, want_input)
        }
        Family::RankFactorised { d_bn } => {
            rank_factorised::grad_batch(spec, params, d_bn, x, batch, upstream, want_input)
        }
        Family::HashedNet { .. } => hashed::grad_batch(spec, params, x, batch, upstream, want_input),
        Family::ShuffleLinear { groups } => {
            shuffle::grad_batch(spec, params, groups, x, batch, upstream, want_input)
        }
    }
}

/// Materialise a column at a time: column j equals `apply(e_j)`.
fn materialize_via_basis(spec: &OperatorSpec, params: &ParamStore) -> DenseTensor {
    let (n_out, n_in) = (spec.n_out, spec.n_in);
    let mut eye = vec![0.0; n_in * n_in];
    for j in 0..n_in {
        eye[j * n_in + j] = 1.0;
    }
    let cols = apply_batch_unchecked(spec, params, &eye, n_in);
    let mut m = DenseTensor::zeros(vec![n_out, n_in]);
    let md = m.as_mut_slice();
    for j in 0..n_in {
        for i in 0..n_out {
            md[i * n_in + j] = cols[j * n_out + i];
        }
    }
    m
}

/// Build the parameter store a spec describes, deterministically from its seed.
pub fn build_params(spec: &OperatorSpec) -> Result<ParamStore> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, 0);
    Ok(match spec.family {
        Family::Dense {} => dense::init(spec, &mut rng),
        Family::Acdc { layers } => acdc::init(spec, layers, &mut rng),
        Family::TensorTrain { tt_rank } => tensor_train::init(spec, tt_rank, &mut rng),
        Family::Tucker { core_ranks } => tucker::init(spec, &core_ranks, &mut rng),
        Family::RankFactorised { d_bn } => rank_factorised::init(spec, d_bn, &mut rng),
        Family::HashedNet { n_real } => {
            let mut table_rng = rng_for(spec.seed, 1);
            hashed::init(spec, n_real, &mut rng, &mut table_rng)
        }
        Family::ShuffleLinear { groups } => shuffle::init(spec, groups, &mut rng),
    })
}

/// Dense baseline operator.
pub fn build_dense(n_out: usize, n_in: usize, seed: u64) -> Result<(OperatorSpec, ParamStore)> {
    let spec = OperatorSpec::new(Family::Dense {}, n_out, n_in, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// Stack of `layers` diagonal-DCT layers preceded by a riffle shuffle.
///
/// Applying the operator computes `x -> P x`, then per layer: inverse DCT,
/// diagonal `D_l`, forward DCT, diagonal `A_l`. Diagonals start near the
/// identity (`1 + 0.01 * g`, `g` standard normal) so deep stacks preserve
/// signal scale at initialisation.
pub fn build_acdc(n: usize, layers: usize, seed: u64) -> Result<(OperatorSpec, ParamStore)> {
    let spec = OperatorSpec::new(Family::Acdc { layers }, n, n, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// Tensor-train operator over the 3-way reshape of the weight matrix.
///
/// Cores have shapes `(1, d0, r)`, `(r, d1, r)`, `(r, d2, 1)` and are drawn
/// i.i.d. normal with variance chosen so reconstructed matrix entries have
/// variance about `2 / (n_in + n_out)`.
pub fn build_tt(
    n_out: usize,
    n_in: usize,
    tt_rank: usize,
    seed: u64,
) -> Result<(OperatorSpec, ParamStore)> {
    let spec = OperatorSpec::new(Family::TensorTrain { tt_rank }, n_out, n_in, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// Resolve a Tucker rank fraction into per-mode core ranks.
pub fn tucker_ranks_for(n_out: usize, n_in: usize, rank_fraction: f64) -> Result<[usize; 3]> {
    if !(rank_fraction > 0.0 && rank_fraction <= 1.0) {
        return Err(Error::Spec(format!(
            "rank_fraction must be in (0, 1], got {rank_fraction}"
        )));
    }
    let dims = reshape3(n_out, n_in)?.dims;
    Ok(dims.map(|d| ((rank_fraction * d as f64).round() as usize).clamp(1, d)))
}

/// Tucker-decomposed operator: low-rank core expanded by per-mode factors.
pub fn build_tucker(
    n_out: usize,
    n_in: usize,
    rank_fraction: f64,
    seed: u64,
) -> Result<(OperatorSpec, ParamStore)> {
    let core_ranks = tucker_ranks_for(n_out, n_in, rank_fraction)?;
    let spec = OperatorSpec::new(Family::Tucker { core_ranks }, n_out, n_in, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// Rank-factorised bottleneck: `y = W2 (W1 x)` with `W1: d_bn x d_in`,
/// `W2: d_out x d_bn`.
pub fn build_rf(
    d_in: usize,
    d_out: usize,
    d_bn: usize,
    seed: u64,
) -> Result<(OperatorSpec, ParamStore)> {
    let spec = OperatorSpec::new(Family::RankFactorised { d_bn }, d_out, d_in, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// Hashed weight sharing: a virtual `n_out x n_in` matrix whose entries are
/// tied to `n_real` trainable weights through a fixed index table sampled
/// uniformly at construction.
pub fn build_hashed(
    n_out: usize,
    n_in: usize,
    n_real: u64,
    seed: u64,
) -> Result<(OperatorSpec, ParamStore)> {
    let spec = OperatorSpec::new(Family::HashedNet { n_real }, n_out, n_in, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// Hashed operator with a bijective (identity) index table, so the virtual
/// matrix is untied and the operator has full dense capacity. Intended for
/// capacity experiments and tests.
pub fn build_hashed_bijective(
    n_out: usize,
    n_in: usize,
    seed: u64,
) -> Result<(OperatorSpec, ParamStore)> {
    let n_virtual = (n_out * n_in) as u64;
    let spec = OperatorSpec::new(Family::HashedNet { n_real: n_virtual }, n_out, n_in, seed)?;
    let mut rng = rng_for(seed, 0);
    let params = hashed::init_with_table(
        &spec,
        (0..n_out * n_in).map(|i| i as u32).collect(),
        &mut rng,
    );
    Ok((spec, params))
}

/// Linearised shuffle unit: `y = B2 P B1 x` with `B1`, `B2` block-diagonal
/// (`groups` blocks each) and `P` the riffle shuffle.
pub fn build_shuffle_linear(
    n: usize,
    groups: usize,
    seed: u64,
) -> Result<(OperatorSpec, ParamStore)> {
    let spec = OperatorSpec::new(Family::ShuffleLinear { groups }, n, n, seed)?;
    let params = build_params(&spec)?;
    Ok((spec, params))
}

/// 3-way dims used by the tensor decompositions. Callers must have
/// validated the spec (reshape3 cannot fail afterwards).
pub(crate) fn tt_dims(spec: &OperatorSpec) -> [usize; 3] {
    reshape3(spec.n_out, spec.n_in)
        .expect("validated spec has a 3-way reshape")
        .dims
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform init scaled by `1 / sqrt(fan_in)`.
pub(crate) fn uniform_fan_in(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

pub(crate) fn normal(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * sigma
        })
        .collect()
}

pub(crate) fn segments_from_lens(named: &[(&str, usize)]) -> Vec<Segment> {
    let mut offset = 0;
    named
        .iter()
        .map(|(name, len)| {
            let s = Segment { name: (*name).to_string(), offset, len: *len };
            offset += len;
            s
        })
        .collect()
}

pub(crate) fn store(flat: Vec<f64>, segments: Vec<Segment>) -> ParamStore {
    ParamStore::new(flat, segments, FixedData::None)
}
