//! The complete pipeline in one go: solve budgets, fit every (kind, budget)
//! cell against a shared teacher, write results.json / pareto.csv / traces,
//! and emit the plot-data CSVs. Equivalent to `sellkit run` + `sellkit
//! emit-plots`.

use sellkit::experiment::{emit_plotdata, run, AblationFlags, BudgetSpec, ExperimentConfig};
use sellkit::{KindId, Schedule, TrainConfig};

fn main() -> sellkit::Result<()> {
    let out_dir = std::env::temp_dir().join("sellkit-full-experiment");
    let config = ExperimentConfig {
        kinds: vec![KindId::RankFactorised, KindId::HashedNet, KindId::TensorTrain],
        layer_dims: vec![(32, 32)],
        budgets: BudgetSpec::Auto("auto:3".into()),
        train: TrainConfig {
            lr0: 0.02,
            schedule: Schedule::Step { milestones: vec![12, 24, 32], factor: 0.2 },
            momentum: 0.9,
            base_decay: 5e-4,
            crs_enabled: true,
            epochs: 40,
            batch: 64,
            steps_per_epoch: 16,
            seed: 0,
        },
        ablations: AblationFlags { crs_off_repeat: true },
        output_dir: out_dir.clone(),
        seed: 2024,
    };

    let summary = run(&config, None, None)?;
    println!(
        "{} runs completed, {} diverged, {} unsupported",
        summary.completed, summary.diverged, summary.unsupported
    );

    emit_plotdata(&out_dir.join("results.json"))?;
    for artifact in [
        "results.json",
        "pareto.csv",
        "params_vs_loss.csv",
        "multadds_vs_loss.csv",
        "crs_delta.csv",
    ] {
        let path = out_dir.join(artifact);
        println!("  {} ({} bytes)", path.display(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    }

    let pareto = std::fs::read_to_string(out_dir.join("pareto.csv")).expect("pareto.csv written");
    println!("pareto.csv:");
    for line in pareto.lines() {
        println!("  {line}");
    }
    Ok(())
}
