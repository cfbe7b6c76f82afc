//! Compression-ratio-scaled weight decay, on versus off, on teachers the
//! students can represent exactly: the decay bias then dominates the final
//! loss and the effect of the scaling is directly visible.

use sellkit::training::random_teacher;
use sellkit::transforms::build_shuffle_linear;
use sellkit::budget::{solve_budget, spec_for};
use sellkit::{fit_matrix, materialize, KindId, TrainConfig};

fn main() -> sellkit::Result<()> {
    let n = 64;

    println!("hashed weights at a 10% budget on a random teacher:");
    let teacher = random_teacher(n, n, 42);
    let sol = solve_budget(KindId::HashedNet, &[(n, n)], 410, 0.0)?;
    let spec = spec_for(sol.knob, n, n, 3)?;
    let mut on = TrainConfig::desk_default(200, 1003);
    on.lr0 = 0.02;
    let mut off = on.clone();
    off.crs_enabled = false;
    let t_on = fit_matrix(&spec, &teacher, &on)?;
    let t_off = fit_matrix(&spec, &teacher, &off)?;
    println!(
        "  effective decay: on {:.2e}, off {:.2e}",
        t_on.epochs[0].effective_decay, t_off.epochs[0].effective_decay
    );
    println!(
        "  final eval: on {:.4e}, off {:.4e}",
        t_on.final_eval_loss().unwrap(),
        t_off.final_eval_loss().unwrap()
    );

    println!("shuffle-linear at 16x compression on a realizable teacher:");
    let (tspec, tparams) = build_shuffle_linear(n, 32, 701)?;
    let teacher = materialize(&tspec, &tparams)?;
    let (spec, _) = build_shuffle_linear(n, 32, 1)?;
    let mut on = TrainConfig::desk_default(200, 2001);
    on.lr0 = 0.05;
    let mut off = on.clone();
    off.crs_enabled = false;
    let t_on = fit_matrix(&spec, &teacher, &on)?;
    let t_off = fit_matrix(&spec, &teacher, &off)?;
    for e in [0usize, 50, 100, 199] {
        if let (Some(a), Some(b)) = (t_on.epochs.get(e), t_off.epochs.get(e)) {
            println!(
                "  epoch {:>3}  crs-on {:.4e}  crs-off {:.4e}",
                e, a.eval_loss, b.eval_loss
            );
        }
    }
    match (t_on.final_eval_loss(), t_off.final_eval_loss()) {
        (Some(a), Some(b)) => println!("  final ratio off/on = {:.1}", b / a),
        _ => println!("  a variant diverged: on {:?}, off {:?}", t_on.diverged, t_off.diverged),
    }
    Ok(())
}
