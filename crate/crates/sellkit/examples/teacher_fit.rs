//! Fit compressed operators to a dense random teacher under equal parameter
//! budgets and print the learning curves.

use sellkit::budget::{solve_budget, spec_for};
use sellkit::training::random_teacher;
use sellkit::{fit_matrix, KindId, TrainConfig};

fn main() -> sellkit::Result<()> {
    let n = 64;
    let teacher = random_teacher(n, n, 42);
    let budget = 410; // ~10% of the dense 4096

    let mut config = TrainConfig::desk_default(120, 7);
    config.lr0 = 0.01; // regression curvature is higher than the classification default

    for kind in [KindId::RankFactorised, KindId::TensorTrain, KindId::HashedNet] {
        let sol = solve_budget(kind, &[(n, n)], budget, 0.0)?;
        let spec = spec_for(sol.knob, n, n, 11)?;
        let trace = fit_matrix(&spec, &teacher, &config)?;
        println!("{kind} at {} params ({}):", sol.params, sol.knob);
        for e in [0usize, 10, 30, 60, 119] {
            if let Some(r) = trace.epochs.get(e) {
                println!(
                    "  epoch {:>3}  train {:.4e}  eval {:.4e}  lr {:.4}",
                    r.epoch, r.train_loss, r.eval_loss, r.lr
                );
            }
        }
        match trace.diverged {
            Some(epoch) => println!("  diverged at epoch {epoch}"),
            None => println!("  final eval loss {:.4e}", trace.final_eval_loss().unwrap()),
        }
    }
    Ok(())
}
