//! `radmoment` batch driver. Prints a JSON report on stdout; on failure prints a JSON
//! error record on stderr and exits with status 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use radmoment::harness::studies::{
    aeps_violations, linspace, study_aeps, study_c2p, study_contraction, AEPS_THRESHOLDS,
};
use radmoment::harness::{convergence, run, ProblemKind, RunConfig};
use radmoment::solvers::SolverConfig;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "radmoment",
    version,
    about = "Spectral two-moment radiation transport benchmarks"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for snapshots, ledger and tables.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "RADMOMENT_THREADS")]
    threads: Option<usize>,
    /// Full-resolution grids instead of desk-scale ones.
    #[arg(long, global = true)]
    long: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark to its final time.
    Run {
        /// Problem id; overrides the config file.
        #[arg(long)]
        problem: Option<ProblemKind>,
    },
    /// Error decay of an analytic benchmark over a list of element counts.
    Convergence {
        #[arg(long, value_delimiter = ',', default_values_t = [16, 32, 64, 128])]
        cells: Vec<usize>,
        /// Spatial degree; the matching SSP-RK order is chosen unless the config names one.
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Recovery iteration counts on a (v, h) grid.
    StudyC2p {
        /// Points per axis; v spans [0, v_max] and h spans [0, 1].
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 0.975)]
        v_max: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Sharpness of the energy-flux speed bound.
    StudyAeps {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Velocity grid points on (−1, 1).
        #[arg(long, default_value_t = 399)]
        velocities: usize,
    },
    /// Contraction threshold of the fixed-point recovery.
    StudyContraction {
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.long |= common.long;
    Ok(cfg)
}

fn write_table(
    dir: Option<&Path>,
    name: &str,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| path.display().to_string())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), |v| format!("{v:e}"))
}

fn execute(cli: Cli) -> Result<Value> {
    let common = &cli.common;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let out = common.out_dir.as_deref();
    match cli.command {
        Command::Run { problem } => {
            let mut cfg = load_config(common)?;
            if let Some(p) = problem {
                cfg.problem = p;
            }
            Ok(serde_json::to_value(run(&cfg, out)?)?)
        }
        Command::Convergence { cells, degree } => {
            let mut cfg = load_config(common)?;
            if degree.is_some() {
                cfg.degree = degree;
            }
            let rep = convergence(&cfg, &cells)?;
            write_table(
                out,
                "convergence.csv",
                "cells,dt,l2_error",
                rep.rows
                    .iter()
                    .map(|r| format!("{},{:e},{:e}", r.cells, r.dt, r.l2_error)),
            )?;
            Ok(serde_json::to_value(rep)?)
        }
        Command::StudyC2p { grid, v_max, samples } => {
            let cfg = load_config(common)?;
            let rows = study_c2p(
                &linspace(0.0, v_max, grid),
                &linspace(0.0, 1.0, grid),
                samples,
                cfg.seed,
                &SolverConfig::default(),
            );
            write_table(
                out,
                "c2p.csv",
                "v,h,picard_mean,picard_max,picard_failures,picard_nonrealizable,aggressive_mean,aggressive_failures,aggressive_nonrealizable,newton_mean,newton_max,newton_failures",
                rows.iter().map(|r| {
                    format!(
                        "{:e},{:e},{},{},{},{},{},{},{},{},{},{}",
                        r.v,
                        r.h,
                        opt(r.picard.mean),
                        r.picard.max,
                        r.picard.failures,
                        r.picard.nonrealizable,
                        opt(r.aggressive.mean),
                        r.aggressive.failures,
                        r.aggressive.nonrealizable,
                        opt(r.newton.mean),
                        r.newton.max,
                        r.newton.failures
                    )
                }),
            )?;
            let max_of = |f: &dyn Fn(&radmoment::harness::studies::C2pRow) -> Option<f64>| {
                rows.iter().filter_map(f).fold(0.0f64, f64::max)
            };
            let failing_v: Vec<f64> = rows
                .iter()
                .filter(|r| r.aggressive.failures > 0)
                .map(|r| r.v)
                .collect();
            Ok(json!({
                "points": rows.len(),
                "samples": samples,
                "picard_max_mean": max_of(&|r| r.picard.mean),
                "picard_failures": rows.iter().map(|r| r.picard.failures).sum::<usize>(),
                "picard_nonrealizable": rows.iter().map(|r| r.picard.nonrealizable).sum::<usize>(),
                "newton_max_mean": max_of(&|r| r.newton.mean),
                "aggressive_min_failing_v": failing_v.iter().copied().fold(f64::INFINITY, f64::min),
            }))
        }
        Command::StudyAeps { samples, velocities } => {
            let cfg = load_config(common)?;
            let lengths: Vec<f64> = (-4..=4).map(|e| 10f64.powi(e)).collect();
            let mut vs = linspace(-0.995, 0.995, velocities);
            vs.extend([-0.003, -0.002, -0.001, 0.001, 0.002, 0.003]);
            let rows = study_aeps(&lengths, &vs, samples, cfg.seed);
            write_table(
                out,
                "aeps.csv",
                "length,v,bound,sampled_max,slack",
                rows.iter().map(|r| {
                    format!(
                        "{:e},{:e},{:e},{:e},{:e}",
                        r.length, r.v, r.bound, r.sampled_max, r.slack
                    )
                }),
            )?;
            let viol = aeps_violations(&rows);
            Ok(json!({
                "rows": rows.len(),
                "thresholds": AEPS_THRESHOLDS,
                "violations": viol,
            }))
        }
        Command::StudyContraction { tol } => Ok(serde_json::to_value(study_contraction(tol))?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.downcast_ref::<radmoment::Error>().map_or("io", |r| r.kind());
            let record = json!({
                "error": {
                    "kind": kind,
                    "message": format!("{e:#}"),
                }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
