//! Configuration-driven experiment runner.
//!
//! For each `(kind, budget)` cell: solve the knob, build the spec, fit the
//! shared random teacher, and record a serialisable result. With the CRS
//! ablation flag set, every cell runs twice (CRS decay on and off). Cells
//! run independently (optionally in parallel) on RNG streams derived from
//! the master seed plus the cell index, so a run is deterministic for a
//! given config regardless of the job count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::assemble_report;
use crate::budget::{auto_budgets, knob_curve, solve_budget, spec_for, support_interval};
use crate::linop::{cost_report, CostModel, CostReport, KindId, OperatorSpec};
use crate::training::{fit_matrix, random_teacher, EpochRecord, TrainConfig};
use crate::{Error, Result};

/// Ablation switches.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationFlags {
    /// Repeat every cell with CRS weight decay disabled and emit a delta table.
    #[serde(default)]
    pub crs_off_repeat: bool,
}

/// Budget selection: an explicit list of parameter counts, or `"auto:k"`
/// for `k` budgets spaced geometrically across the kinds' common support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetSpec {
    Auto(String),
    Explicit(Vec<u64>),
}

impl BudgetSpec {
    fn auto_count(&self) -> Result<Option<usize>> {
        match self {
            BudgetSpec::Explicit(v) => {
                if v.is_empty() || v.contains(&0) {
                    return Err(Error::Config("budgets must be a non-empty list of positive counts".into()));
                }
                Ok(None)
            }
            BudgetSpec::Auto(s) => {
                let k = s
                    .strip_prefix("auto:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| {
                        Error::Config(format!("budgets string must look like \"auto:k\", got {s:?}"))
                    })?;
                Ok(Some(k))
            }
        }
    }
}

/// Experiment configuration, deserialised from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kinds: Vec<KindId>,
    pub layer_dims: Vec<(usize, usize)>,
    pub budgets: BudgetSpec,
    pub train: TrainConfig,
    #[serde(default)]
    pub ablations: AblationFlags,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::Config("kinds must not be empty".into()));
        }
        if self.layer_dims.len() != 1 {
            return Err(Error::Config(
                "the fit benchmark substitutes a single layer; layer_dims must have exactly one entry".into(),
            ));
        }
        let (n_out, n_in) = self.layer_dims[0];
        if n_out == 0 || n_in == 0 {
            return Err(Error::Config("layer dims must be positive".into()));
        }
        self.budgets.auto_count()?;
        self.train.validate()?;
        Ok(())
    }
}

/// Outcome of one `(kind, budget)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    /// Budget outside this kind's feasible interval; the run continues with
    /// the other cells.
    Unsupported(String),
    Diverged {
        epoch: usize,
    },
}

/// Serialisable record of one run: cost report, loss trace and config echo.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: KindId,
    pub knob: String,
    pub budget_target: u64,
    pub crs_enabled: bool,
    pub status: RunStatus,
    pub spec: Option<OperatorSpec>,
    pub cost: Option<CostReport>,
    pub final_eval_loss: Option<f64>,
    pub trace: Vec<EpochRecord>,
    /// Trainer configuration actually used (per-cell seed), absent for
    /// unsupported cells.
    pub config: Option<TrainConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub completed: usize,
    pub diverged: usize,
    pub unsupported: usize,
}

/// splitmix64-style mix of the master seed and a stream index.
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn trace_file_name(kind: KindId, budget: u64, crs: bool) -> String {
    format!("trace_{kind}_{budget}_{}.csv", if crs { "crs" } else { "nocrs" })
}

/// Execute the full experiment described by `config`.
///
/// Writes `results.json`, `pareto.csv` and one trace CSV per run into
/// `config.output_dir`. Returns counts for exit-status decisions. A
/// diverged cell never aborts sibling cells.
pub fn run(config: &ExperimentConfig, jobs: Option<usize>, epochs_override: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    if epochs_override == Some(0) {
        return Err(Error::Config("epochs override must be >= 1".into()));
    }
    let (n_out, n_in) = config.layer_dims[0];

    let budgets: Vec<u64> = match config.budgets.auto_count()? {
        None => match &config.budgets {
            BudgetSpec::Explicit(v) => v.clone(),
            BudgetSpec::Auto(_) => unreachable!(),
        },
        Some(k) => {
            let curves = config
                .kinds
                .iter()
                .map(|&kind| knob_curve(kind, &config.layer_dims, 65))
                .collect::<Result<Vec<_>>>()?;
            let (lo, hi) = if curves.len() == 1 {
                (curves[0].min_params(), curves[0].max_params())
            } else {
                support_interval(&curves)?
            };
            auto_budgets(lo, hi, k)
        }
    };

    let teacher = random_teacher(n_out, n_in, derive_seed(config.seed, u64::MAX));

    let variants: &[bool] = if config.ablations.crs_off_repeat { &[true, false] } else { &[true] };
    let mut cells = Vec::new();
    for &kind in &config.kinds {
        for &budget in &budgets {
            for &crs in variants {
                cells.push((kind, budget, crs));
            }
        }
    }

    let run_cell = |(index, &(kind, budget, crs)): (usize, &(KindId, u64, bool))| -> ExperimentResult {
        let mut train = config.train.clone();
        if let Some(e) = epochs_override {
            train.epochs = e;
        }
        train.crs_enabled = crs;
        train.seed = derive_seed(config.seed, 2 * index as u64 + 1);

        let solution = match solve_budget(kind, &config.layer_dims, budget, 0.0) {
            Ok(s) => s,
            Err(e) => {
                return ExperimentResult {
                    kind,
                    knob: String::new(),
                    budget_target: budget,
                    crs_enabled: crs,
                    status: RunStatus::Unsupported(e.to_string()),
                    spec: None,
                    cost: None,
                    final_eval_loss: None,
                    trace: Vec::new(),
                    config: None,
                }
            }
        };
        let spec = spec_for(solution.knob, n_out, n_in, derive_seed(config.seed, 2 * index as u64))
            .expect("solved knob is valid for the layer");
        let cost = cost_report(&spec, &CostModel::default()).expect("valid spec");
        let trace = fit_matrix(&spec, &teacher, &train).expect("validated spec and teacher");
        let status = match trace.diverged {
            Some(epoch) => RunStatus::Diverged { epoch },
            None => RunStatus::Ok,
        };
        ExperimentResult {
            kind,
            knob: solution.knob.to_string(),
            budget_target: budget,
            crs_enabled: crs,
            status,
            spec: Some(spec),
            cost: Some(cost),
            final_eval_loss: trace.final_eval_loss(),
            trace: trace.epochs,
            config: Some(train),
        }
    };

    let results: Vec<ExperimentResult> = match jobs {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| cells.par_iter().enumerate().map(run_cell).collect())
        }
        None => cells.par_iter().enumerate().map(run_cell).collect(),
    };

    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    for r in &results {
        if r.trace.is_empty() {
            continue;
        }
        let path = out_dir.join(trace_file_name(r.kind, r.budget_target, r.crs_enabled));
        let mut csv = String::from("epoch,train_loss,eval_loss,lr,effective_decay\n");
        for rec in &r.trace {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.epoch, rec.train_loss, rec.eval_loss, rec.lr, rec.effective_decay
            ));
        }
        fs::write(&path, csv).map_err(|e| Error::io(path.display().to_string(), e))?;
    }

    let results_path = out_dir.join("results.json");
    let mut bytes = serde_json::to_vec_pretty(&results).expect("results serialise");
    bytes.push(b'\n');
    fs::write(&results_path, bytes).map_err(|e| Error::io(results_path.display().to_string(), e))?;

    let primary: Vec<ExperimentResult> = results.iter().filter(|r| r.crs_enabled).cloned().collect();
    let table = assemble_report(&primary);
    let pareto_path = out_dir.join("pareto.csv");
    fs::write(&pareto_path, table.to_csv()).map_err(|e| Error::io(pareto_path.display().to_string(), e))?;

    Ok(RunSummary {
        completed: results.iter().filter(|r| matches!(r.status, RunStatus::Ok)).count(),
        diverged: results.iter().filter(|r| matches!(r.status, RunStatus::Diverged { .. })).count(),
        unsupported: results
            .iter()
            .filter(|r| matches!(r.status, RunStatus::Unsupported(_)))
            .count(),
    })
}

/// Read `results.json` and emit the plot-data CSVs next to it:
/// `params_vs_loss.csv`, `multadds_vs_loss.csv` (rows without a mult-add
/// estimate are omitted) and, when both CRS variants are present,
/// `crs_delta.csv`.
pub fn emit_plotdata(results_path: &Path) -> Result<()> {
    let text = fs::read_to_string(results_path)
        .map_err(|e| Error::io(results_path.display().to_string(), e))?;
    let results: Vec<ExperimentResult> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(results_path.display().to_string(), &e))?;
    let dir = results_path.parent().unwrap_or_else(|| Path::new("."));

    let ok = |r: &&ExperimentResult| matches!(r.status, RunStatus::Ok);

    let mut params_csv = String::from("kind,knob,crs,params,param_ratio,eval_loss\n");
    for r in results.iter().filter(ok) {
        let cost = r.cost.as_ref().expect("ok row has cost");
        params_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kind,
            r.knob,
            r.crs_enabled,
            cost.params,
            cost.param_ratio,
            r.final_eval_loss.expect("ok row has loss")
        ));
    }
    let p = dir.join("params_vs_loss.csv");
    fs::write(&p, params_csv).map_err(|e| Error::io(p.display().to_string(), e))?;

    let mut ma_csv = String::from("kind,knob,crs,multadds,multadd_ratio,eval_loss\n");
    for r in results.iter().filter(ok) {
        let cost = r.cost.as_ref().expect("ok row has cost");
        let (Some(multadds), Some(ratio)) = (cost.multadds, cost.multadd_ratio) else {
            continue;
        };
        ma_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kind,
            r.knob,
            r.crs_enabled,
            multadds,
            ratio,
            r.final_eval_loss.expect("ok row has loss")
        ));
    }
    let p = dir.join("multadds_vs_loss.csv");
    fs::write(&p, ma_csv).map_err(|e| Error::io(p.display().to_string(), e))?;

    // one delta row per (kind, budget) pair with both variants present
    let mut delta_rows = Vec::new();
    for on in results.iter().filter(|r| r.crs_enabled) {
        let off = results
            .iter()
            .find(|r| !r.crs_enabled && r.kind == on.kind && r.budget_target == on.budget_target);
        if let Some(off) = off {
            delta_rows.push((on, off));
        }
    }
    if !delta_rows.is_empty() {
        let mut csv = String::from("kind,knob,budget,loss_crs_on,loss_crs_off,delta,off_diverged\n");
        for (on, off) in delta_rows {
            let lo = on.final_eval_loss.unwrap_or(f64::NAN);
            let lf = off.final_eval_loss.unwrap_or(f64::NAN);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                on.kind,
                on.knob,
                on.budget_target,
                lo,
                lf,
                lf - lo,
                matches!(off.status, RunStatus::Diverged { .. })
            ));
        }
        let p = dir.join("crs_delta.csv");
        fs::write(&p, csv).map_err(|e| Error::io(p.display().to_string(), e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            kinds: vec![KindId::RankFactorised, KindId::HashedNet],
            layer_dims: vec![(16, 16)],
            budgets: BudgetSpec::Explicit(vec![64, 128]),
            train: TrainConfig {
                epochs: 3,
                batch: 8,
                steps_per_epoch: 2,
                ..TrainConfig::desk_default(3, 0)
            },
            ablations: AblationFlags { crs_off_repeat: false },
            output_dir: dir,
            seed: 12,
        }
    }

    #[test]
    fn empty_kinds_is_config_error() {
        let mut cfg = tiny_config(std::env::temp_dir());
        cfg.kinds.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn budget_spec_parsing() {
        let auto: BudgetSpec = serde_json::from_str("\"auto:3\"").unwrap();
        assert_eq!(auto.auto_count().unwrap(), Some(3));
        let explicit: BudgetSpec = serde_json::from_str("[100, 200]").unwrap();
        assert_eq!(explicit, BudgetSpec::Explicit(vec![100, 200]));
        let bad: BudgetSpec = serde_json::from_str("\"auto:releases\"").unwrap();
        assert!(bad.auto_count().is_err());
    }

    #[test]
    fn derive_seed_is_stable_and_spreads() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
    }

    #[test]
    fn run_writes_artifacts_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path().to_path_buf());
        let summary = run(&cfg, Some(2), None).unwrap();
        assert_eq!(summary.completed, 4);
        let first = fs::read(dir.path().join("results.json")).unwrap();
        assert!(dir.path().join("pareto.csv").exists());

        let summary2 = run(&cfg, Some(1), None).unwrap();
        assert_eq!(summary, summary2);
        let second = fs::read(dir.path().join("results.json")).unwrap();
        assert_eq!(first, second, "results.json must be byte-identical across runs");

        emit_plotdata(&dir.path().join("results.json")).unwrap();
        assert!(dir.path().join("params_vs_loss.csv").exists());
        assert!(dir.path().join("multadds_vs_loss.csv").exists());
    }

    #[test]
    fn unsupported_budget_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path().to_path_buf());
        // 16x16 RF supports at most 2*16*16 = 512 params; 3000 is out of range
        cfg.budgets = BudgetSpec::Explicit(vec![3000, 64]);
        let summary = run(&cfg, None, None).unwrap();
        // HashedNet also lacks 3000 (> 256): two unsupported cells
        assert_eq!(summary.unsupported, 2);
        assert_eq!(summary.completed, 2);
    }

    #[test]
    fn dense_single_run_fits_its_own_budget() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path().to_path_buf());
        cfg.kinds = vec![KindId::Dense];
        cfg.budgets = BudgetSpec::Explicit(vec![256]);
        cfg.train = TrainConfig {
            lr0: 0.1,
            epochs: 30,
            batch: 32,
            steps_per_epoch: 16,
            ..TrainConfig::desk_default(30, 0)
        };
        let summary = run(&cfg, None, None).unwrap();
        assert_eq!(summary.completed, 1);
        let results: Vec<ExperimentResult> = serde_json::from_slice(
            &fs::read(dir.path().join("results.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(results.len(), 1);
        assert!(results[0].final_eval_loss.unwrap() < 1e-6);
    }

    #[test]
    fn auto_budgets_are_geometric_within_support() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path().to_path_buf());
        cfg.kinds = vec![KindId::RankFactorised, KindId::HashedNet, KindId::TensorTrain];
        cfg.budgets = BudgetSpec::Auto("auto:3".into());
        let summary = run(&cfg, None, None).unwrap();
        assert_eq!(summary.completed + summary.diverged, 9, "3 kinds x 3 budgets");
        let results: Vec<ExperimentResult> = serde_json::from_slice(
            &fs::read(dir.path().join("results.json")).unwrap(),
        )
        .unwrap();
        let mut budgets: Vec<u64> = results.iter().map(|r| r.budget_target).collect();
        budgets.sort_unstable();
        budgets.dedup();
        assert_eq!(budgets.len(), 3);
        let mid = (budgets[0] as f64 * budgets[2] as f64).sqrt();
        assert!((budgets[1] as f64 - mid).abs() <= 1.0, "budgets {budgets:?} not geometric");
    }

    #[test]
    fn tensor_kinds_are_omitted_from_multadd_plot() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path().to_path_buf());
        cfg.kinds = vec![KindId::TensorTrain];
        cfg.budgets = BudgetSpec::Explicit(vec![64]);
        run(&cfg, None, None).unwrap();
        emit_plotdata(&dir.path().join("results.json")).unwrap();
        let ma = fs::read_to_string(dir.path().join("multadds_vs_loss.csv")).unwrap();
        assert_eq!(ma.lines().count(), 1, "only the header: {ma}");
        let params = fs::read_to_string(dir.path().join("params_vs_loss.csv")).unwrap();
        assert_eq!(params.lines().count(), 2, "header plus the TT row");
    }

    #[test]
    fn crs_delta_has_one_row_per_joined_pair() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path().to_path_buf());
        cfg.ablations.crs_off_repeat = true;
        run(&cfg, None, None).unwrap();
        emit_plotdata(&dir.path().join("results.json")).unwrap();
        let delta = fs::read_to_string(dir.path().join("crs_delta.csv")).unwrap();
        // 2 kinds x 2 budgets, both variants present for each
        assert_eq!(delta.lines().count(), 1 + 4, "{delta}");
    }

    #[test]
    fn emit_plotdata_reports_parse_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.json");
        fs::write(&path, "[{\"kind\": \"Dense\",}]").unwrap();
        match emit_plotdata(&path) {
            Err(Error::Parse { line, column, .. }) => {
                assert!(line >= 1 && column >= 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
