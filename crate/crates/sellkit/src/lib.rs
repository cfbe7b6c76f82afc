//! Structured efficient linear layers (SELLs).
//!
//! A dense matrix-vector product `y = Wx` can be replaced by a structured,
//! trainable substitute that uses far fewer parameters, fewer mult-adds, or
//! both. This crate implements six such substitutes behind one uniform
//! operator interface, together with the machinery needed to compare them
//! fairly:
//!
//! - [`kernels`]: orthonormal DCT-II/III pair, riffle shuffle, k-mode tensor
//!   product and near-equal 3-way reshape factorisation.
//! - [`linop`]: the [`OperatorSpec`]/[`ParamStore`] abstraction with
//!   `apply`, `materialize`, exact parameter counts and a mult-add cost model.
//! - [`transforms`]: constructors for the seven operator families
//!   (dense baseline, diagonal-DCT stacks, tensor-train, Tucker,
//!   rank-factorised bottleneck, hashed weight sharing, shuffle-linear).
//! - [`training`]: exact reverse-mode gradients, SGD with momentum and
//!   compression-ratio-scaled (CRS) weight decay, and a teacher-matrix
//!   regression harness.
//! - [`budget`]: normalised knob curves, common-support intervals,
//!   log-midpoint budget selection and a knob-from-budget solver.
//! - [`analysis`]: hashed-weight exclusion analysis (exact, asymptotic and
//!   Monte-Carlo), diagonal-DCT mult-add crossover search, and Pareto
//!   report assembly.
//! - [`experiment`]: a configuration-driven, deterministic experiment
//!   runner emitting JSON results and CSV plot data.
//!
//! Every example under `examples/` is runnable and exercises one of the
//! capabilities above, e.g.
//!
//! ```bash
//! cargo run --example materialize_vs_apply
//! cargo run --example teacher_fit
//! ```

pub mod analysis;
pub mod budget;
pub mod experiment;
pub mod kernels;
pub mod linop;
pub(crate) mod mat;
pub mod tensor;
pub mod training;
pub mod transforms;

mod error;

pub use error::{Error, Result};
pub use linop::{
    apply, cost_report, materialize, multadd_count, param_count, CostModel, CostReport, Family,
    KindId, MultAdds, OperatorSpec, ParamStore, Segment,
};
pub use tensor::DenseTensor;
pub use training::{
    crs_decay, fit_matrix, fit_matrix_from, grad, random_teacher, sgd_step, FitTrace, Schedule,
    TrainConfig,
};
