//! Build one operator of every family, check that `apply` agrees with the
//! materialised matrix, and print the parameter/mult-add accounting against
//! the dense baseline.

use sellkit::transforms::{
    build_acdc, build_dense, build_hashed, build_rf, build_shuffle_linear, build_tt, build_tucker,
};
use sellkit::{apply, cost_report, materialize, CostModel};

fn main() -> sellkit::Result<()> {
    let n = 32;
    let ops = vec![
        build_dense(n, n, 1)?,
        build_acdc(n, 4, 2)?,
        build_tt(n, n, 4, 3)?,
        build_tucker(n, n, 0.5, 4)?,
        build_rf(n, n, 6, 5)?,
        build_hashed(n, n, 100, 6)?,
        build_shuffle_linear(n, 4, 7)?,
    ];
    let model = CostModel::default();
    let x: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.31).sin()).collect();

    println!(
        "{:<16} {:>8} {:>12} {:>11} {:>12}  max|apply - Mx|",
        "kind", "params", "param_ratio", "multadds", "ma_ratio"
    );
    for (spec, params) in &ops {
        let y = apply(spec, params, &x)?;
        let m = materialize(spec, params)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += m.at2(i, j) * x[j];
            }
            worst = worst.max((acc - y[i]).abs());
        }
        let report = cost_report(spec, &model)?;
        println!(
            "{:<16} {:>8} {:>12.4} {:>11} {:>12}  {worst:.2e}",
            spec.kind().to_string(),
            report.params,
            report.param_ratio,
            report.multadds.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into()),
            report
                .multadd_ratio
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }
    Ok(())
}
