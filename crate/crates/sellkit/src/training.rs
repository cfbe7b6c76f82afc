//! Training: reverse-mode gradients, SGD with momentum and CRS-scaled weight
//! decay, and the teacher-matrix regression benchmark.
//!
//! The benchmark fits a compressed operator to a fixed dense teacher `W` by
//! minimising `E || apply(x) - W x ||^2` over standard-normal minibatches.
//! Per-epoch `eval_loss` is `||materialize - W||_F^2 / (n_out * n_in)`; the
//! reported `train_loss` is scaled to the same per-entry units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linop::{check_params, OperatorSpec, ParamStore};
use crate::tensor::DenseTensor;
use crate::transforms;
use crate::{Error, Result};

/// Learning-rate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// Multiply the rate by `factor` at each milestone epoch.
    Step { milestones: Vec<usize>, factor: f64 },
    /// Cosine annealing from `lr0` to 0 over `total_epochs`.
    Cosine { total_epochs: usize },
}

impl Schedule {
    pub fn lr_at(&self, lr0: f64, epoch: usize) -> f64 {
        match self {
            Schedule::Step { milestones, factor } => {
                let passed = milestones.iter().filter(|&&m| epoch >= m).count();
                lr0 * factor.powi(passed as i32)
            }
            Schedule::Cosine { total_epochs } => {
                let t = epoch as f64 / (*total_epochs).max(1) as f64;
                lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t.min(1.0)).cos())
            }
        }
    }

    /// First epoch of the final schedule stage (the last milestone), if any.
    pub fn final_stage_start(&self) -> Option<usize> {
        match self {
            Schedule::Step { milestones, .. } => milestones.iter().copied().max(),
            Schedule::Cosine { .. } => None,
        }
    }
}

fn default_steps_per_epoch() -> usize {
    16
}

/// Trainer configuration. Defaults mirror the usual step-decay recipe:
/// lr 0.1 scaled by 0.2 at 30/60/80% of the run, momentum 0.9, weight decay
/// 5e-4, batch 128.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub schedule: Schedule,
    pub momentum: f64,
    pub base_decay: f64,
    pub crs_enabled: bool,
    pub epochs: usize,
    pub batch: usize,
    /// Minibatches drawn per epoch; the data stream is synthetic, so the
    /// epoch is defined as a fixed number of optimisation steps.
    #[serde(default = "default_steps_per_epoch")]
    pub steps_per_epoch: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Step-decay defaults for a run of `epochs` epochs.
    pub fn desk_default(epochs: usize, seed: u64) -> Self {
        Self {
            lr0: 0.1,
            schedule: Schedule::Step {
                milestones: vec![epochs * 3 / 10, epochs * 6 / 10, epochs * 8 / 10],
                factor: 0.2,
            },
            momentum: 0.9,
            base_decay: 5e-4,
            crs_enabled: true,
            epochs,
            batch: 128,
            steps_per_epoch: default_steps_per_epoch(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::Config(format!("lr0 must be > 0, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.base_decay < 0.0 {
            return Err(Error::Config("base_decay must be >= 0".into()));
        }
        if self.epochs < 1 || self.batch < 1 || self.steps_per_epoch < 1 {
            return Err(Error::Config("epochs, batch, steps_per_epoch must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.schedule.lr_at(self.lr0, epoch)
    }
}

/// Compression-ratio-scaled weight decay: `d_c = base * m / n` for a
/// compressed layer with `m` of the dense layer's `n` parameters.
pub fn crs_decay(base_decay: f64, m: u64, n: u64) -> f64 {
    base_decay * m as f64 / n as f64
}

/// Reverse-mode gradients of `<upstream, apply(x)>`.
///
/// Returns parameter gradients in the flat `ParamStore` layout and the
/// input gradient of length `n_in`.
pub fn grad(
    spec: &OperatorSpec,
    params: &ParamStore,
    x: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != spec.n_in || upstream.len() != spec.n_out {
        return Err(Error::ShapeMismatch(format!(
            "grad expects x of length {} and upstream of length {}, got {} and {}",
            spec.n_in,
            spec.n_out,
            x.len(),
            upstream.len()
        )));
    }
    check_params(spec, params)?;
    let (pg, ig) = transforms::grad_batch_unchecked(spec, params, x, 1, upstream, true);
    Ok((pg, ig.expect("input grad requested")))
}

/// One SGD-with-momentum step with coupled L2 decay:
/// `g' = g + decay * p; v <- momentum * v + g'; p <- p - lr * v`.
///
/// Only trainable parameters live in `params`; fixed metadata never decays.
pub fn sgd_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    decay: f64,
) -> Result<()> {
    if grads.len() != params.len() || velocity.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "sgd_step lengths differ: params {}, grads {}, velocity {}",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        if !g.is_finite() {
            return Err(Error::Diverged { epoch: 0 });
        }
        let g = g + decay * *p;
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// One per-epoch record of the fit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub lr: f64,
    pub effective_decay: f64,
}

/// Learning-curve trace of one teacher-fit run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitTrace {
    pub epochs: Vec<EpochRecord>,
    pub final_params: ParamStore,
    /// Epoch index at which the loss went non-finite, if the run diverged.
    /// The trace is truncated at that epoch.
    pub diverged: Option<usize>,
}

impl FitTrace {
    pub fn final_eval_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.eval_loss)
    }

    /// Serialise as `epoch,train_loss,eval_loss,lr,effective_decay` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,eval_loss,lr,effective_decay\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.eval_loss, r.lr, r.effective_decay
            ));
        }
        out
    }
}

/// Fit a compressed operator to a dense teacher matrix.
///
/// Parameters are built from the spec's seed; the minibatch stream comes
/// from the config's seed. Deterministic given both.
pub fn fit_matrix(spec: &OperatorSpec, teacher: &DenseTensor, config: &TrainConfig) -> Result<FitTrace> {
    let params = transforms::build_params(spec)?;
    fit_matrix_from(spec, params, teacher, config)
}

/// [`fit_matrix`] starting from explicit initial parameters (e.g. the
/// bijective hashed override).
pub fn fit_matrix_from(
    spec: &OperatorSpec,
    params: ParamStore,
    teacher: &DenseTensor,
    config: &TrainConfig,
) -> Result<FitTrace> {
    config.validate()?;
    check_params(spec, &params)?;
    let (n_out, n_in) = (spec.n_out, spec.n_in);
    if teacher.rank() != 2 || teacher.rows() != n_out || teacher.cols() != n_in {
        return Err(Error::ShapeMismatch(format!(
            "teacher shape {:?} does not match operator {}x{}",
            teacher.shape(),
            n_out,
            n_in
        )));
    }

    let dense_params = spec.dense_params();
    let m_params = params.len() as u64;
    let effective_decay = if config.crs_enabled {
        crs_decay(config.base_decay, m_params, dense_params)
    } else {
        config.base_decay
    };

    let mut params = params;
    let mut velocity = vec![0.0; params.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch = config.batch;
    let entries = (n_out * n_in) as f64;

    let mut x = vec![0.0; batch * n_in];
    let mut targets = vec![0.0; batch * n_out];
    let mut upstream = vec![0.0; batch * n_out];

    let mut trace = Vec::with_capacity(config.epochs);
    let mut diverged = None;

    'epochs: for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let mut train_acc = 0.0;
        for _ in 0..config.steps_per_epoch {
            for v in x.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal);
            }
            crate::mat::matmul_nt(&x, batch, n_in, teacher.as_slice(), n_out, &mut targets);
            let y = transforms::apply_batch_unchecked(spec, &params, &x, batch);

            let mut loss = 0.0;
            let scale = 2.0 / batch as f64;
            for (u, (&yv, &tv)) in upstream.iter_mut().zip(y.iter().zip(&targets)) {
                let r = yv - tv;
                loss += r * r;
                *u = scale * r;
            }
            loss /= batch as f64;
            if !loss.is_finite() {
                diverged = Some(epoch);
                break 'epochs;
            }
            train_acc += loss / entries;

            let (grads, _) =
                transforms::grad_batch_unchecked(spec, &params, &x, batch, &upstream, false);
            if sgd_step(
                params.flat_mut(),
                &grads,
                &mut velocity,
                lr,
                config.momentum,
                effective_decay,
            )
            .is_err()
            {
                diverged = Some(epoch);
                break 'epochs;
            }
        }

        let materialized = transforms::materialize_unchecked(spec, &params);
        let eval_loss = materialized
            .sq_distance(teacher)
            .expect("teacher shape checked")
            / entries;
        if !eval_loss.is_finite() {
            diverged = Some(epoch);
            break 'epochs;
        }
        trace.push(EpochRecord {
            epoch,
            train_loss: train_acc / config.steps_per_epoch as f64,
            eval_loss,
            lr,
            effective_decay,
        });
    }

    Ok(FitTrace { epochs: trace, final_params: params, diverged })
}

/// Deterministic dense teacher with entries `N(0, 1/n_in)` (unit-gain rows).
pub fn random_teacher(n_out: usize, n_in: usize, seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = 1.0 / (n_in as f64).sqrt();
    let data: Vec<f64> = (0..n_out * n_in)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * sigma)
        .collect();
    DenseTensor::matrix(n_out, n_in, data).expect("shape consistent")
}
