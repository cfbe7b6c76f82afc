//! Excluded-weight analysis for hashed layers: a real weight never hit by
//! the index table is wasted. Compare the exact expectation
//! `N_r (1 - 1/N_r)^{N_v}` with the asymptotic `exp(-1/c)` and a
//! Monte-Carlo estimate across compression ratios.

use sellkit::analysis::{exclusion_exact, exclusion_limit, exclusion_montecarlo};

fn main() {
    let n_virtual = 10_000u64;
    println!("virtual weights: {n_virtual}");
    println!(
        "{:>5} {:>12} {:>12} {:>20}",
        "c", "exact", "exp(-1/c)", "monte-carlo (1000x)"
    );
    for i in 1..=9 {
        let c = i as f64 / 10.0;
        let n_real = (c * n_virtual as f64).round() as u64;
        let exact = exclusion_exact(n_real, n_virtual) / n_real as f64;
        let limit = exclusion_limit(c);
        let (mc, stderr) = exclusion_montecarlo(n_real, n_virtual, 1000, 7 + i);
        println!("{c:>5.1} {exact:>12.6} {limit:>12.6} {mc:>13.6} +/- {stderr:.1e}");
    }
    println!();
    println!(
        "the 10-20% exclusion band corresponds to c in [{:.3}, {:.3}]",
        1.0 / 10f64.ln(),
        1.0 / 5f64.ln()
    );
}
