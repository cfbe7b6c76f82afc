//! Analysis utilities: hashed-weight exclusion (exact, asymptotic limit and
//! Monte-Carlo), the diagonal-DCT mult-add crossover, and comparative report
//! assembly with Pareto-frontier extraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::experiment::{ExperimentResult, RunStatus};
use crate::linop::{CostModel, KindId};
use crate::transforms::acdc_multadds;
use crate::{Error, Result};

/// Exclusion analysis of a hashed layer with `n_real` weights tied across
/// `n_virtual` slots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub n_real: u64,
    pub n_virtual: u64,
    /// Expected number of real weights never referenced by the table.
    pub exact_expected_excluded: f64,
    /// Asymptotic excluded fraction `exp(-1/c)` at `c = n_real / n_virtual`.
    pub limit_ratio: f64,
    /// Monte-Carlo estimate of the excluded fraction, with standard error.
    pub montecarlo: Option<(f64, f64)>,
}

/// Expected number of excluded weights: `N_r (1 - 1/N_r)^{N_v}`.
///
/// Evaluated in log space (`N_v * log1p(-1/N_r)`) to avoid underflow at
/// large virtual sizes.
pub fn exclusion_exact(n_real: u64, n_virtual: u64) -> f64 {
    assert!(n_real >= 1 && n_virtual >= 1);
    if n_real == 1 {
        return 0.0;
    }
    let nr = n_real as f64;
    nr * (n_virtual as f64 * (-1.0 / nr).ln_1p()).exp()
}

/// Asymptotic excluded fraction `exp(-1/c)` for compression ratio
/// `c = N_r / N_v`.
pub fn exclusion_limit(c: f64) -> f64 {
    assert!(c > 0.0, "compression ratio must be positive");
    (-1.0 / c).exp()
}

/// Sample index tables and count the fraction of real weights never
/// referenced. Returns `(mean fraction, standard error)`.
pub fn exclusion_montecarlo(n_real: u64, n_virtual: u64, trials: u64, seed: u64) -> (f64, f64) {
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nr = n_real as usize;
    let mut used = vec![false; nr];
    let mut fractions = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        used.fill(false);
        let mut hit = 0u64;
        for _ in 0..n_virtual {
            let k = rng.random_range(0..n_real) as usize;
            if !used[k] {
                used[k] = true;
                hit += 1;
            }
        }
        fractions.push((n_real - hit) as f64 / n_real as f64);
    }
    let mean = fractions.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = fractions.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>()
            / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    (mean, stderr)
}

/// Assemble the full exclusion report, optionally with a Monte-Carlo check.
pub fn exclusion_report(
    n_real: u64,
    n_virtual: u64,
    trials: Option<u64>,
    seed: u64,
) -> ExclusionReport {
    ExclusionReport {
        n_real,
        n_virtual,
        exact_expected_excluded: exclusion_exact(n_real, n_virtual),
        limit_ratio: exclusion_limit(n_real as f64 / n_virtual as f64),
        montecarlo: trials.map(|t| exclusion_montecarlo(n_real, n_virtual, t, seed)),
    }
}

const CROSSOVER_SCAN_LIMIT: u64 = 1 << 20;

/// Smallest width `N` at which an `L`-layer diagonal-DCT stack uses fewer
/// mult-adds than the dense `N^2`, scanning all integers upward (the cost
/// formula does not require constructible widths).
pub fn acdc_crossover(layers: usize, model: &CostModel) -> Result<u64> {
    (2..CROSSOVER_SCAN_LIMIT)
        .find(|&n| acdc_multadds(n, layers as u64, model) < n * n)
        .ok_or(Error::NoCrossover)
}

/// One comparative row: cost against achieved fit quality.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: KindId,
    pub knob: String,
    pub params: u64,
    pub multadds: Option<u64>,
    pub param_ratio: f64,
    pub eval_loss: Option<f64>,
    pub diverged: bool,
    pub on_frontier: bool,
}

/// Rows sorted by parameter count, with the Pareto frontier marked.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ReportRow>,
}

impl ComparisonTable {
    /// The subset of rows not dominated in both parameters and loss.
    pub fn frontier(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.on_frontier).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "kind,knob,params,multadds,param_ratio,eval_loss,diverged,on_frontier\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.kind,
                r.knob,
                r.params,
                r.multadds.map(|m| m.to_string()).unwrap_or_default(),
                r.param_ratio,
                r.eval_loss.map(|l| l.to_string()).unwrap_or_default(),
                r.diverged,
                r.on_frontier
            ));
        }
        out
    }
}

/// Row `a` dominates `b` when it is no worse in both coordinates and
/// strictly better in one. Diverged rows never dominate and are never on
/// the frontier.
fn dominates(a: (u64, f64), b: (u64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Build the comparison table from completed experiment results.
///
/// Rows are sorted by parameter count (ties by loss, kind and knob so the
/// output is independent of input order).
pub fn assemble_report(results: &[ExperimentResult]) -> ComparisonTable {
    let mut rows: Vec<ReportRow> = results
        .iter()
        .map(|r| ReportRow {
            kind: r.kind,
            knob: r.knob.clone(),
            params: r.cost.as_ref().map(|c| c.params).unwrap_or(0),
            multadds: r.cost.as_ref().and_then(|c| c.multadds),
            param_ratio: r.cost.as_ref().map(|c| c.param_ratio).unwrap_or(f64::NAN),
            eval_loss: r.final_eval_loss,
            diverged: matches!(r.status, RunStatus::Diverged { .. }),
            on_frontier: false,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.params
            .cmp(&b.params)
            .then(
                a.eval_loss
                    .unwrap_or(f64::INFINITY)
                    .total_cmp(&b.eval_loss.unwrap_or(f64::INFINITY)),
            )
            .then(a.kind.name().cmp(b.kind.name()))
            .then(a.knob.cmp(&b.knob))
    });

    let points: Vec<Option<(u64, f64)>> = rows
        .iter()
        .map(|r| match (r.diverged, r.eval_loss) {
            (false, Some(l)) if l.is_finite() => Some((r.params, l)),
            _ => None,
        })
        .collect();
    for i in 0..rows.len() {
        let Some(p) = points[i] else { continue };
        let dominated = points
            .iter()
            .enumerate()
            .any(|(j, q)| j != i && q.is_some_and(|q| dominates(q, p)));
        rows[i].on_frontier = !dominated;
    }
    ComparisonTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exclusion_exact_edge_cases() {
        assert_eq!(exclusion_exact(1, 10), 0.0);
        // two weights, one virtual slot: exactly one weight unused
        assert!((exclusion_exact(2, 1) - 1.0).abs() < 1e-12);
        // no underflow blow-up at large virtual sizes
        let e = exclusion_exact(1000, 10_000_000);
        assert!(e.is_finite() && (0.0..1.0).contains(&e));
    }

    #[test]
    fn exclusion_limit_values() {
        assert!((exclusion_limit(0.1) - 4.539992976e-5).abs() < 1e-12);
        assert!((exclusion_limit(0.5) - 0.1353352832).abs() < 1e-9);
        assert!(exclusion_limit(1e12) > 0.999999);
    }

    #[test]
    fn montecarlo_two_by_two() {
        // n_real = n_virtual = 2: four equally likely tables, exclusion
        // fraction 0.5 in two of them -> mean 0.25
        let (mean, stderr) = exclusion_montecarlo(2, 2, 40_000, 99);
        assert!((mean - 0.25).abs() < 5.0 * stderr.max(1e-4), "mean {mean}");
        let (m1, s1) = exclusion_montecarlo(1, 5, 100, 1);
        assert_eq!((m1, s1), (0.0, 0.0));
    }

    #[test]
    fn crossover_default_model() {
        let n = acdc_crossover(12, &CostModel::default()).unwrap();
        assert!((600..=650).contains(&n), "crossover {n}");
        // the 12-layer stack costs more than dense below the crossover and
        // less at or above it
        let m = CostModel::default();
        assert!(acdc_multadds(625, 12, &m) >= 625 * 625);
        assert!(acdc_multadds(626, 12, &m) < 626 * 626);
        assert!(acdc_multadds(1024, 12, &m) < 1024 * 1024);
    }

    #[test]
    fn crossover_monotone_in_layers_and_kappa() {
        let m = CostModel::default();
        let c1 = acdc_crossover(1, &m).unwrap();
        let c12 = acdc_crossover(12, &m).unwrap();
        assert!(c1 < c12);
        let doubled = CostModel { dct_kappa: m.dct_kappa * 2.0, ..m };
        assert!(acdc_crossover(12, &doubled).unwrap() > c12);
    }

    fn row(params: u64, loss: f64) -> ExperimentResult {
        ExperimentResult {
            kind: KindId::HashedNet,
            knob: format!("n={params}"),
            budget_target: params,
            crs_enabled: true,
            status: RunStatus::Ok,
            spec: None,
            cost: Some(crate::linop::CostReport {
                params,
                multadds: Some(params),
                dense_params: 10_000,
                dense_multadds: 10_000,
                param_ratio: params as f64 / 10_000.0,
                multadd_ratio: Some(1.0),
            }),
            final_eval_loss: Some(loss),
            trace: Vec::new(),
            config: None,
        }
    }

    #[test]
    fn frontier_single_and_dominance() {
        let t = assemble_report(&[row(100, 0.5)]);
        assert_eq!(t.frontier().len(), 1);

        // A has fewer params and lower loss: frontier = {A}
        let t = assemble_report(&[row(200, 0.9), row(100, 0.5)]);
        let f = t.frontier();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].params, 100);
    }

    #[test]
    fn frontier_matches_bruteforce_and_order_invariant() {
        let mut state = 42u64;
        let mut rows: Vec<ExperimentResult> = (0..50)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let params = 10 + (state >> 40) % 1000;
                let loss = ((state >> 20) % 10_000) as f64 / 10_000.0;
                row(params, loss)
            })
            .collect();

        let table = assemble_report(&rows);
        // brute-force O(n^2) dominance filter as oracle
        let pts: Vec<(u64, f64)> = table.rows.iter().map(|r| (r.params, r.eval_loss.unwrap())).collect();
        for (i, r) in table.rows.iter().enumerate() {
            let dominated = pts
                .iter()
                .enumerate()
                .any(|(j, &q)| j != i && dominates(q, pts[i]));
            assert_eq!(r.on_frontier, !dominated);
        }

        rows.reverse();
        let table2 = assemble_report(&rows);
        let f1: Vec<(u64, String)> = table.frontier().iter().map(|r| (r.params, r.knob.clone())).collect();
        let f2: Vec<(u64, String)> = table2.frontier().iter().map(|r| (r.params, r.knob.clone())).collect();
        assert_eq!(f1, f2);
    }
}
