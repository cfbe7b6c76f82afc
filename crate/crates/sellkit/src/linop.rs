//! The uniform compressed-linear-operator abstraction.
//!
//! An [`OperatorSpec`] describes one member of an operator family (kind,
//! shape, structural hyperparameters, seed); a [`ParamStore`] holds its flat
//! trainable parameter vector plus fixed (non-trainable) metadata. Every
//! family exposes the same four operations: `apply`, `materialize`,
//! `param_count` and `multadd_count`, all measured against the dense
//! `n_out x n_in` baseline.

use serde::{Deserialize, Serialize};

use crate::tensor::DenseTensor;
use crate::transforms;
use crate::{Error, Result};

/// Default DCT cost coefficient: mult-adds(DCT_N) = kappa * N * log2(N).
///
/// Calibrated so a 12-layer diagonal-DCT stack first beats the dense
/// mult-add count at 626 units (see `analysis::acdc_crossover`).
pub const DEFAULT_DCT_KAPPA: f64 = 2.7;

/// Operator family identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KindId {
    Dense,
    #[serde(rename = "ACDC")]
    Acdc,
    TensorTrain,
    Tucker,
    RankFactorised,
    HashedNet,
    ShuffleLinear,
}

impl KindId {
    pub const ALL: [KindId; 7] = [
        KindId::Dense,
        KindId::Acdc,
        KindId::TensorTrain,
        KindId::Tucker,
        KindId::RankFactorised,
        KindId::HashedNet,
        KindId::ShuffleLinear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KindId::Dense => "Dense",
            KindId::Acdc => "ACDC",
            KindId::TensorTrain => "TensorTrain",
            KindId::Tucker => "Tucker",
            KindId::RankFactorised => "RankFactorised",
            KindId::HashedNet => "HashedNet",
            KindId::ShuffleLinear => "ShuffleLinear",
        }
    }
}

impl std::fmt::Display for KindId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KindId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Dense" => Ok(KindId::Dense),
            "ACDC" | "Acdc" => Ok(KindId::Acdc),
            "TensorTrain" | "TT" => Ok(KindId::TensorTrain),
            "Tucker" => Ok(KindId::Tucker),
            "RankFactorised" | "RF" => Ok(KindId::RankFactorised),
            "HashedNet" => Ok(KindId::HashedNet),
            "ShuffleLinear" => Ok(KindId::ShuffleLinear),
            other => Err(Error::Config(format!("unknown operator kind '{other}'"))),
        }
    }
}

/// Kind-specific structural hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "hyper")]
pub enum Family {
    Dense {},
    #[serde(rename = "ACDC")]
    Acdc {
        #[serde(rename = "L")]
        layers: usize,
    },
    TensorTrain {
        tt_rank: usize,
    },
    Tucker {
        core_ranks: [usize; 3],
    },
    RankFactorised {
        d_bn: usize,
    },
    HashedNet {
        n_real: u64,
    },
    ShuffleLinear {
        groups: usize,
    },
}

impl Family {
    pub fn kind(&self) -> KindId {
        match self {
            Family::Dense {} => KindId::Dense,
            Family::Acdc { .. } => KindId::Acdc,
            Family::TensorTrain { .. } => KindId::TensorTrain,
            Family::Tucker { .. } => KindId::Tucker,
            Family::RankFactorised { .. } => KindId::RankFactorised,
            Family::HashedNet { .. } => KindId::HashedNet,
            Family::ShuffleLinear { .. } => KindId::ShuffleLinear,
        }
    }
}

/// Immutable descriptor of one compressed-linear-layer instance.
///
/// Serialises to `{"kind": ..., "n_out": ..., "n_in": ..., "hyper": {...},
/// "seed": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub n_out: usize,
    pub n_in: usize,
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

impl OperatorSpec {
    /// Build a spec, validating hyperparameters against the shape.
    pub fn new(family: Family, n_out: usize, n_in: usize, seed: u64) -> Result<Self> {
        let spec = Self { n_out, n_in, family, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> KindId {
        self.family.kind()
    }

    pub fn dense_params(&self) -> u64 {
        self.n_out as u64 * self.n_in as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_out == 0 || self.n_in == 0 {
            return Err(Error::Spec("n_out and n_in must be >= 1".into()));
        }
        transforms::validate(self)
    }
}

/// One named contiguous slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Non-trainable metadata fixed at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FixedData {
    None,
    /// Hashed-weight index table: one entry per virtual weight, row-major,
    /// each in `[0, n_real)`.
    HashIndex(Vec<u32>),
}

/// Flat trainable parameters plus a segment map naming each structural piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    flat: Vec<f64>,
    segments: Vec<Segment>,
    fixed: FixedData,
}

impl ParamStore {
    pub(crate) fn new(flat: Vec<f64>, segments: Vec<Segment>, fixed: FixedData) -> Self {
        debug_assert!(segments_partition(&segments, flat.len()));
        Self { flat, segments, fixed }
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn fixed(&self) -> &FixedData {
        &self.fixed
    }

    /// Borrow a named segment.
    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.flat[s.offset..s.offset + s.len])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let seg = self.segments.iter().find(|s| s.name == name)?;
        let (offset, len) = (seg.offset, seg.len);
        Some(&mut self.flat[offset..offset + len])
    }

    /// Borrow segment `i` in construction order.
    pub(crate) fn seg(&self, i: usize) -> &[f64] {
        let s = &self.segments[i];
        &self.flat[s.offset..s.offset + s.len]
    }

    pub(crate) fn hash_table(&self) -> Option<&[u32]> {
        match &self.fixed {
            FixedData::HashIndex(t) => Some(t),
            FixedData::None => None,
        }
    }
}

fn segments_partition(segments: &[Segment], total: usize) -> bool {
    let mut cursor = 0;
    for s in segments {
        if s.offset != cursor {
            return false;
        }
        cursor += s.len;
    }
    cursor == total
}

/// Check that a parameter store is structurally consistent with a spec.
pub fn check_params(spec: &OperatorSpec, params: &ParamStore) -> Result<()> {
    let want = param_count(spec)?;
    if params.flat.len() as u64 != want {
        return Err(Error::Spec(format!(
            "param store has {} values but {} spec needs {want}",
            params.flat.len(),
            spec.kind()
        )));
    }
    match (&spec.family, &params.fixed) {
        (Family::HashedNet { n_real }, FixedData::HashIndex(table)) => {
            if table.len() != spec.n_out * spec.n_in {
                return Err(Error::Spec(format!(
                    "hash index table has {} entries, expected {}",
                    table.len(),
                    spec.n_out * spec.n_in
                )));
            }
            if table.iter().any(|&i| u64::from(i) >= *n_real) {
                return Err(Error::Spec("hash index table entry out of range".into()));
            }
            Ok(())
        }
        (Family::HashedNet { .. }, FixedData::None) => {
            Err(Error::Spec("hashed operator is missing its index table".into()))
        }
        (_, FixedData::None) => Ok(()),
        (_, FixedData::HashIndex(_)) => {
            Err(Error::Spec("unexpected hash index table for non-hashed operator".into()))
        }
    }
}

/// Mult-add count for one application, or `Unavailable` where no robust
/// structured-apply estimate exists (tensor decompositions).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultAdds {
    Count(u64),
    Unavailable,
}

impl MultAdds {
    pub fn as_option(&self) -> Option<u64> {
        match self {
            MultAdds::Count(c) => Some(*c),
            MultAdds::Unavailable => None,
        }
    }
}

/// Cost model knobs for operations without a literal mult-add count.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CostModel {
    /// DCT mult-adds are `round(dct_kappa * N * log2 N)`.
    pub dct_kappa: f64,
    /// When set, tensor-decomposition kinds report the materialise-then-apply
    /// figure (`n_out * n_in` plus reconstruction cost) instead of
    /// `Unavailable`.
    pub materialized_tensor_apply: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { dct_kappa: DEFAULT_DCT_KAPPA, materialized_tensor_apply: false }
    }
}

impl CostModel {
    pub fn dct_cost(&self, n: u64) -> u64 {
        if n <= 1 {
            return 0;
        }
        (self.dct_kappa * n as f64 * (n as f64).log2()).round() as u64
    }
}

/// Parameter and mult-add accounting against the dense baseline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostReport {
    pub params: u64,
    pub multadds: Option<u64>,
    pub dense_params: u64,
    pub dense_multadds: u64,
    pub param_ratio: f64,
    pub multadd_ratio: Option<f64>,
}

/// Exact number of trainable parameters for a spec.
pub fn param_count(spec: &OperatorSpec) -> Result<u64> {
    spec.validate()?;
    Ok(transforms::param_count_unchecked(spec))
}

/// Mult-adds for one `apply` under the given cost model.
pub fn multadd_count(spec: &OperatorSpec, model: &CostModel) -> Result<MultAdds> {
    spec.validate()?;
    Ok(transforms::multadds_unchecked(spec, model))
}

/// Assemble the full cost report for a spec.
pub fn cost_report(spec: &OperatorSpec, model: &CostModel) -> Result<CostReport> {
    let params = param_count(spec)?;
    let dense_params = spec.dense_params();
    let dense_multadds = dense_params;
    let multadds = transforms::multadds_unchecked(spec, model).as_option();
    Ok(CostReport {
        params,
        multadds,
        dense_params,
        dense_multadds,
        param_ratio: params as f64 / dense_params as f64,
        multadd_ratio: multadds.map(|m| m as f64 / dense_multadds as f64),
    })
}

/// Apply the operator to one input vector: `y = W x`.
pub fn apply(spec: &OperatorSpec, params: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.n_in {
        return Err(Error::ShapeMismatch(format!(
            "input has length {}, operator expects {}",
            x.len(),
            spec.n_in
        )));
    }
    check_params(spec, params)?;
    Ok(transforms::apply_batch_unchecked(spec, params, x, 1))
}

/// Apply the operator to a batch of inputs stored as rows.
///
/// `x` is `batch x n_in` row-major; the result is `batch x n_out` row-major.
pub fn apply_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    batch: usize,
) -> Result<Vec<f64>> {
    if x.len() != batch * spec.n_in {
        return Err(Error::ShapeMismatch(format!(
            "batch input has {} values, expected {} x {}",
            x.len(),
            batch,
            spec.n_in
        )));
    }
    check_params(spec, params)?;
    Ok(transforms::apply_batch_unchecked(spec, params, x, batch))
}

/// Materialise the dense `n_out x n_in` matrix the operator represents.
pub fn materialize(spec: &OperatorSpec, params: &ParamStore) -> Result<DenseTensor> {
    check_params(spec, params)?;
    Ok(transforms::materialize_unchecked(spec, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shape() {
        let spec = OperatorSpec::new(Family::Acdc { layers: 12 }, 64, 64, 7).unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["kind"], "ACDC");
        assert_eq!(json["n_out"], 64);
        assert_eq!(json["n_in"], 64);
        assert_eq!(json["hyper"]["L"], 12);
        assert_eq!(json["seed"], 7);

        let back: OperatorSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn spec_json_roundtrip_all_kinds() {
        let specs = vec![
            OperatorSpec::new(Family::Dense {}, 8, 8, 1).unwrap(),
            OperatorSpec::new(Family::TensorTrain { tt_rank: 2 }, 8, 8, 2).unwrap(),
            OperatorSpec::new(Family::Tucker { core_ranks: [2, 2, 2] }, 8, 8, 3).unwrap(),
            OperatorSpec::new(Family::RankFactorised { d_bn: 3 }, 8, 8, 4).unwrap(),
            OperatorSpec::new(Family::HashedNet { n_real: 5 }, 8, 8, 5).unwrap(),
            OperatorSpec::new(Family::ShuffleLinear { groups: 2 }, 8, 8, 6).unwrap(),
        ];
        for spec in specs {
            let s = serde_json::to_string(&spec).unwrap();
            let back: OperatorSpec = serde_json::from_str(&s).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(OperatorSpec::new(Family::Acdc { layers: 0 }, 8, 8, 0).is_err());
        assert!(OperatorSpec::new(Family::Acdc { layers: 1 }, 7, 7, 0).is_err());
        assert!(OperatorSpec::new(Family::Acdc { layers: 1 }, 8, 4, 0).is_err());
        assert!(OperatorSpec::new(Family::RankFactorised { d_bn: 9 }, 8, 8, 0).is_err());
        assert!(OperatorSpec::new(Family::HashedNet { n_real: 65 }, 8, 8, 0).is_err());
        assert!(OperatorSpec::new(Family::HashedNet { n_real: 0 }, 8, 8, 0).is_err());
        assert!(OperatorSpec::new(Family::ShuffleLinear { groups: 3 }, 8, 8, 0).is_err());
        assert!(OperatorSpec::new(Family::Tucker { core_ranks: [5, 1, 1] }, 2, 4, 0).is_err());
    }

    #[test]
    fn dct_cost_model_rounds() {
        let m = CostModel::default();
        assert_eq!(m.dct_cost(1), 0);
        // kappa * 4 * 2 = 21.6 -> 22
        assert_eq!(m.dct_cost(4), 22);
    }
}
