use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otflow::harness::{self, ExperimentConfig, RunRecord};
use otflow::schemes::Termination;
use otflow::{selfcheck, Error};

const OUT_DIR_ENV: &str = "OTFLOW_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "otflow", version, about = "Constrained gradient flows for transport map estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory. Falls back to $OTFLOW_OUT_DIR, then the config, then ./otflow-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every configured method on every configured seed.
    Run {
        #[command(flatten)]
        common: Common,
        /// Restrict to a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to a single method label.
        #[arg(long)]
        method: Option<String>,
    },
    /// Run one method on one seed and print the per-step trace.
    Single {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "implicit")]
        method: String,
    },
    /// Recompute the final MMD of a saved run record.
    Eval {
        record: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the built-in oracle and invariant checks.
    Check {
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("otflow-out"))
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { common, seed, method } => {
            let mut config = load_config(&common)?;
            if let Some(seed) = seed {
                config.seeds = vec![seed];
            }
            if let Some(label) = method {
                let m = config
                    .method(&label)
                    .ok_or_else(|| Error::InvalidConfig(format!("no method labelled {label:?}")))?;
                config.methods = vec![m];
            }
            let dir = out_dir(&common, &config);
            let quiet = common.quiet;
            let summary = harness::run_suite(&config, &dir, |label, seed, outcome| {
                if quiet {
                    return;
                }
                match outcome {
                    Ok(r) => eprintln!(
                        "{label} seed {seed}: mmd {:.6} ({:.1}s)",
                        r.final_mmd, r.wall_time_seconds
                    ),
                    Err(e) => eprintln!("{label} seed {seed}: FAILED: {e}"),
                }
            })?;
            if !quiet {
                print!("{}", summary.to_csv());
                eprintln!("wrote {}", dir.join("summary.csv").display());
            }
            if !summary.failures.is_empty() {
                eprintln!("{} run(s) failed", summary.failures.len());
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Single { common, seed, method } => {
            let config = load_config(&common)?;
            let scheme = config
                .method(&method)
                .ok_or_else(|| Error::InvalidConfig(format!("no method labelled {method:?}")))?;
            let record = harness::run_single(&config, &scheme, seed)?;
            let path = harness::record_path(&out_dir(&common, &config), &record.method, seed);
            record.write(&path)?;
            if !common.quiet {
                print_trace(&record);
                println!("record: {}", path.display());
            }
            Ok(match record.termination {
                Termination::Completed => ExitCode::SUCCESS,
                Termination::Aborted { .. } => ExitCode::from(2),
            })
        }
        Command::Eval { record, quiet } => eval(&record, quiet),
        Command::Check { quiet } => {
            let results = selfcheck::run_all();
            let mut failed = 0;
            for r in &results {
                if !r.passed {
                    failed += 1;
                }
                if !quiet || !r.passed {
                    println!("{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                }
            }
            println!("{}/{} checks passed", results.len() - failed, results.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn print_trace(record: &RunRecord) {
    println!("method {} seed {}", record.method, record.seed);
    println!("{:>5} {:>14} {:>12} {:>12} {:>10}", "step", "surrogate", "grad_norm", "displacement", "delta");
    for (k, d) in record.diagnostics.iter().enumerate() {
        let delta = d.inexactness_delta.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        println!(
            "{:>5} {:>14.6e} {:>12.4e} {:>12.4e} {:>10}",
            k + 1,
            d.surrogate_loss,
            d.grad_norm,
            d.map_displacement,
            delta
        );
    }
    if let Termination::Aborted { step, reason } = &record.termination {
        println!("aborted at step {step}: {reason}");
    }
    println!("final mmd {:.17e}", record.final_mmd);
    if let Some(e) = record.final_map_error {
        println!("final map error {e:.6e}");
    }
    println!("wall time {:.2}s", record.wall_time_seconds);
}

fn eval(path: &Path, quiet: bool) -> Result<ExitCode, Error> {
    let record = RunRecord::read(path)?;
    let net = harness::network_for(&record.experiment)?;
    let eval = harness::evaluate_final(&net, &record.theta_final, &record.experiment, record.seed)?;
    let diff = (eval.mmd - record.final_mmd).abs();
    println!("{:.17e}", eval.mmd);
    if !quiet {
        eprintln!("recorded {:.17e}, |difference| {diff:.3e}", record.final_mmd);
    }
    Ok(if diff <= 1e-12 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
