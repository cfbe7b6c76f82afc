//! Command-line front end: experiment runner, analysis queries, budget
//! solving and plot-data emission. All logic lives in the library; this
//! binary only parses arguments and maps errors to exit codes
//! (0 success, 1 config error, 2 I/O or parse error, 3 all runs diverged).

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use sellkit::analysis::{acdc_crossover, exclusion_report};
use sellkit::budget::solve_budget;
use sellkit::experiment::{emit_plotdata, run, ExperimentConfig};
use sellkit::{CostModel, Error, KindId};

#[derive(Parser)]
#[command(name = "sellkit", about = "Structured efficient linear layer toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured epoch count (quick smoke runs).
        #[arg(long)]
        epochs_override: Option<usize>,
        /// Worker threads for independent (kind, budget) cells.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Closed-form and Monte-Carlo analyses.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCmd,
    },
    /// Parameter-budget queries.
    Budget {
        #[command(subcommand)]
        what: BudgetCmd,
    },
    /// Emit plot-data CSVs from a results.json file.
    EmitPlots {
        #[arg(long)]
        results: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Hashed-weight exclusion: exact expectation, asymptotic limit and an
    /// optional Monte-Carlo check.
    Exclusion {
        #[arg(long)]
        n_real: u64,
        #[arg(long)]
        n_virtual: u64,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Smallest layer width where the diagonal-DCT stack beats dense mult-adds.
    Crossover {
        #[arg(long)]
        layers: usize,
        /// DCT cost coefficient (defaults to the calibrated model).
        #[arg(long)]
        kappa: Option<f64>,
    },
}

#[derive(Subcommand)]
enum BudgetCmd {
    /// Find the knob value whose parameter count is closest to a target.
    Solve {
        #[arg(long, value_parser = parse_kind)]
        kind: KindId,
        /// Layer shapes like "256x256" or "64x64,128x128".
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[arg(long)]
        target: u64,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
}

#[derive(Clone)]
struct Dims(Vec<(usize, usize)>);

fn parse_kind(s: &str) -> Result<KindId, String> {
    KindId::from_str(s).map_err(|e| e.to_string())
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let mut dims = Vec::new();
    for part in s.split(',') {
        let (a, b) = part
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("dims entry '{part}' must look like 64x64"))?;
        let n_out = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
        let n_in = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
        dims.push((n_out, n_in));
    }
    if dims.is_empty() {
        return Err("dims must not be empty".into());
    }
    Ok(Dims(dims))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } => 2,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run { config, epochs_override, jobs } => {
            let config = ExperimentConfig::from_path(&config)?;
            let summary = run(&config, jobs, epochs_override)?;
            println!(
                "completed {} run(s), {} diverged, {} unsupported; artifacts in {}",
                summary.completed,
                summary.diverged,
                summary.unsupported,
                config.output_dir.display()
            );
            if summary.completed == 0 && summary.diverged > 0 {
                return Ok(3);
            }
            Ok(0)
        }
        Command::Analyze { what } => {
            match what {
                AnalyzeCmd::Exclusion { n_real, n_virtual, trials, seed } => {
                    if n_real < 1 || n_virtual < 1 || n_real > n_virtual {
                        return Err(Error::Config(
                            "need 1 <= n_real <= n_virtual".into(),
                        ));
                    }
                    let report = exclusion_report(n_real, n_virtual, trials, seed);
                    println!("n_real: {}", report.n_real);
                    println!("n_virtual: {}", report.n_virtual);
                    println!("expected excluded weights: {}", report.exact_expected_excluded);
                    println!(
                        "excluded fraction (exact): {}",
                        report.exact_expected_excluded / report.n_real as f64
                    );
                    println!("excluded fraction (limit exp(-1/c)): {}", report.limit_ratio);
                    if let Some((mean, stderr)) = report.montecarlo {
                        println!("excluded fraction (monte-carlo): {mean} +/- {stderr}");
                    }
                }
                AnalyzeCmd::Crossover { layers, kappa } => {
                    if layers < 1 {
                        return Err(Error::Config("layers must be >= 1".into()));
                    }
                    let mut model = CostModel::default();
                    if let Some(k) = kappa {
                        model.dct_kappa = k;
                    }
                    let n = acdc_crossover(layers, &model)?;
                    println!(
                        "{layers}-layer stack beats dense mult-adds from {n} units (kappa {})",
                        model.dct_kappa
                    );
                }
            }
            Ok(0)
        }
        Command::Budget { what } => {
            match what {
                BudgetCmd::Solve { kind, dims, target, tol } => {
                    let sol = solve_budget(kind, &dims.0, target, tol)?;
                    println!("kind: {kind}");
                    println!("knob: {}", sol.knob);
                    println!("params: {}", sol.params);
                    println!("target: {target}");
                }
            }
            Ok(0)
        }
        Command::EmitPlots { results } => {
            emit_plotdata(&results)?;
            println!("plot data written next to {}", results.display());
            Ok(0)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
