//! Knob curves over the normalised range, the common-support interval,
//! geometric budget selection, and solving a knob from a target count.

use sellkit::budget::{auto_budgets, knob_curve, solve_budget, spec_for, support_interval};
use sellkit::{param_count, KindId};

fn main() -> sellkit::Result<()> {
    let dims = [(256, 256)];
    let kinds = [
        KindId::Acdc,
        KindId::TensorTrain,
        KindId::Tucker,
        KindId::RankFactorised,
        KindId::HashedNet,
        KindId::ShuffleLinear,
    ];

    let mut curves = Vec::new();
    println!("parameter range per kind on a 256x256 layer:");
    for kind in kinds {
        let curve = knob_curve(kind, &dims, 33)?;
        println!("  {:<16} [{:>6}, {:>6}]", kind.to_string(), curve.min_params(), curve.max_params());
        curves.push(curve);
    }

    let (lo, hi) = support_interval(&curves)?;
    println!("common support: [{lo}, {hi}]");

    let budgets = auto_budgets(lo, hi, 3);
    println!("auto:3 budgets (geometric): {budgets:?}");

    for &budget in &budgets {
        println!("solving for {budget} parameters:");
        for kind in kinds {
            match solve_budget(kind, &dims, budget, 0.0) {
                Ok(sol) => {
                    let spec = spec_for(sol.knob, 256, 256, 0)?;
                    println!(
                        "  {:<16} {} -> {} params (exact count {})",
                        kind.to_string(),
                        sol.knob,
                        sol.params,
                        param_count(&spec)?
                    );
                }
                Err(e) => println!("  {:<16} unsupported: {e}", kind.to_string()),
            }
        }
    }
    Ok(())
}
