use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::ExperimentConfig;
use super::record::{RunRecord, RECORD_FORMAT};
use crate::divergences::{mmd_energy, RelativeEntropy};
use crate::error::{Error, Result};
use crate::icnn::{Icnn, IcnnSpec};
use crate::model::MapModel;
use crate::rng::{substream, GENERATOR_NAME};
use crate::schemes::{run_scheme, Sampler, SchemeConfig};

pub const SUMMARY_HEADER: &str = "method,n_seeds,mmd_mean,mmd_std,mmd_min,mmd_max,mean_wall_time_s";

pub fn network_for(config: &ExperimentConfig) -> Result<Icnn> {
    Icnn::new(IcnnSpec::new(config.dim, config.hidden_widths.clone()))
}

/// Initial parameters shared by every method run under `seed`.
pub fn theta0_for(net: &Icnn, seed: u64) -> Vec<f64> {
    net.init_params(&mut substream(seed, "init"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mmd: f64,
    pub map_error: Option<f64>,
}

/// MMD between `T_θ∗ρ₀` and `γ` on fresh `n_eval`-point clouds drawn from the
/// seed's evaluation stream, plus the `L²(ρ₀)` error against the closed-form
/// map when one exists.
pub fn evaluate_final<M: MapModel + ?Sized>(
    model: &M,
    theta: &[f64],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Evaluation> {
    let mut rng = substream(seed, "eval");
    let x = config.source().sample(config.n_eval, &mut rng);
    let y = config.target.sample(config.dim, config.n_eval, &mut rng);
    let pushed = model.push_forward(theta, &x)?;
    let mmd = mmd_energy(&pushed, &y)?;
    let map_error = config.oracle_map().map(|t| {
        let mut ss = 0.0;
        for (xi, ti) in x.rows().zip(pushed.rows()) {
            let exact = t.apply(xi);
            ss += exact.iter().zip(ti).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        (ss / x.len() as f64).sqrt()
    });
    Ok(Evaluation { mmd, map_error })
}

/// Trains one method from the seed's shared initialization and evaluates it.
pub fn run_single(config: &ExperimentConfig, method: &SchemeConfig, seed: u64) -> Result<RunRecord> {
    let net = network_for(config)?;
    let theta0 = theta0_for(&net, seed);
    let mut method = method.clone();
    method.batch_n.get_or_insert(config.n_train);
    let functional = RelativeEntropy::new(config.target.potential(), config.eps_rule);
    let source = config.source();
    let mut rng = substream(seed, &format!("batches/{}", method.label()));

    let start = Instant::now();
    let run = run_scheme(&net, &functional, &method, &theta0, &source, &mut rng)?;
    let eval = evaluate_final(&net, &run.theta_final, config, seed)?;
    let wall = start.elapsed().as_secs_f64();

    Ok(RunRecord {
        format: RECORD_FORMAT.into(),
        method: method.label().to_string(),
        seed,
        generator: GENERATOR_NAME.into(),
        theta_init: theta0,
        theta_final: run.theta_final,
        diagnostics: run.diagnostics,
        termination: run.termination,
        final_mmd: eval.mmd,
        final_map_error: eval.map_error,
        wall_time_seconds: wall,
        scheme: method,
        experiment: config.clone(),
    })
}

pub fn record_path(out_dir: &Path, method: &str, seed: u64) -> PathBuf {
    out_dir.join("records").join(format!("{method}_seed{seed}.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub n_seeds: usize,
    pub mmd_mean: f64,
    pub mmd_std: f64,
    pub mmd_min: f64,
    pub mmd_max: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub method: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
}

impl Summary {
    pub fn row(&self, method: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.method, r.n_seeds, r.mmd_mean, r.mmd_std, r.mmd_min, r.mmd_max, r.mean_wall_time_s
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Vec<SummaryRow>> {
        let mut lines = text.lines();
        if lines.next() != Some(SUMMARY_HEADER) {
            return Err(Error::Parse("summary header mismatch".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 7 {
                    return Err(Error::Parse(format!("bad summary line {l:?}")));
                }
                Ok(SummaryRow {
                    method: f[0].to_string(),
                    n_seeds: f[1].parse().map_err(|e| Error::Parse(format!("{}: {e}", f[1])))?,
                    mmd_mean: num(f[2])?,
                    mmd_std: num(f[3])?,
                    mmd_min: num(f[4])?,
                    mmd_max: num(f[5])?,
                    mean_wall_time_s: num(f[6])?,
                })
            })
            .collect()
    }
}

/// Per-method statistics of `final_mmd`, methods in first-seen order.
/// The standard deviation uses the `n − 1` denominator.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|method| {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
            let n = mine.len();
            let mmd: Vec<f64> = mine.iter().map(|r| r.final_mmd).collect();
            let mean = mmd.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                mmd.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SummaryRow {
                method: method.to_string(),
                n_seeds: n,
                mmd_mean: mean,
                mmd_std: var.sqrt(),
                mmd_min: mmd.iter().copied().fold(f64::INFINITY, f64::min),
                mmd_max: mmd.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_wall_time_s: mine.iter().map(|r| r.wall_time_seconds).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

/// Runs every method on every seed, writing one record per run plus
/// `summary.csv` (and `failures.csv` when some runs fail) under `out_dir`.
pub fn run_suite<P>(config: &ExperimentConfig, out_dir: &Path, mut progress: P) -> Result<Summary>
where
    P: FnMut(&str, u64, std::result::Result<&RunRecord, &Error>),
{
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let methods = config.resolved_methods();
    let mut records = Vec::with_capacity(methods.len() * config.seeds.len());
    let mut failures = Vec::new();
    for &seed in &config.seeds {
        for method in &methods {
            match run_single(config, method, seed) {
                Ok(rec) => {
                    rec.write(&record_path(out_dir, &rec.method, seed))?;
                    progress(method.label(), seed, Ok(&rec));
                    records.push(rec);
                }
                Err(e) => {
                    progress(method.label(), seed, Err(&e));
                    failures.push(RunFailure {
                        method: method.label().to_string(),
                        seed,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    // method order as configured, not as completed
    let mut rows = summarize(&records);
    rows.sort_by_key(|r| methods.iter().position(|m| m.label() == r.method));
    let summary = Summary { rows, failures };
    std::fs::write(out_dir.join("summary.csv"), summary.to_csv())?;
    if !summary.failures.is_empty() {
        let mut s = String::from("method,seed,error\n");
        for f in &summary.failures {
            let _ = writeln!(s, "{},{},{:?}", f.method, f.seed, f.message);
        }
        std::fs::write(out_dir.join("failures.csv"), s)?;
    }
    Ok(summary)
}
