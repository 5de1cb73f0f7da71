//! Run driver: builds a benchmark, advances it to t_end, and writes outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use super::diagnostics::{convergence_slope, grey_moments};
use super::io::{write_grey, write_snapshot, LedgerWriter};
use super::problems::Problem;
use crate::error::{Error, Result};
use crate::timeint::{Integrator, State, StepStats};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub grid: String,
    pub t: f64,
    pub steps: usize,
    pub dt: f64,
    pub ledger_residual: f64,
    /// Largest ledger residual over all steps.
    pub max_ledger_residual: f64,
    /// Smallest post-limiter γ/E_K over every stage.
    pub min_scaled_gamma: f64,
    /// Smallest cell-average γ/E over every stage.
    pub min_average_gamma: f64,
    pub limited_elements: usize,
    pub tvd_limited_lines: usize,
    pub transport_evaluations: usize,
    pub c2p_iterations: u64,
    pub collision_iterations: u64,
    pub snapshots: usize,
    pub metrics: BTreeMap<String, f64>,
}

pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    run_problem(&Problem::from_config(cfg)?, out_dir)
}

struct Outputs<'a> {
    dir: &'a Path,
    ledger: LedgerWriter,
    snapshots: usize,
}

impl Outputs<'_> {
    fn snapshot(&mut self, problem: &Problem, integ: &Integrator, state: &State) -> Result<()> {
        let op = &integ.op;
        let mut cache = op.new_cache();
        op.recover_nodes(&state.u, &mut cache)?;
        let path = self.dir.join(format!("snapshot_{:05}.csv", self.snapshots));
        write_snapshot(
            &path,
            problem,
            &op.disc,
            &op.fluid,
            state.t,
            &state.u,
            &cache.nodes,
        )?;
        self.snapshots += 1;
        Ok(())
    }
}

/// Advances `problem` to its final time. With `out_dir`, writes `ledger.csv` every
/// step, snapshots at the output cadence (always the initial and final states),
/// `grey.csv` and `report.json` at the end.
pub fn run_problem(problem: &Problem, out_dir: Option<&Path>) -> Result<RunReport> {
    let (mut integ, u0) = problem.build()?;
    let mut state = integ.initial_state(u0)?;
    let dt = problem.time_step(&integ)?;
    let mut outputs = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let mut ledger = LedgerWriter::create(&dir.join("ledger.csv"))?;
            ledger.row(0, 0.0, &integ.op.disc.total(&state.u), &state.ledger)?;
            let mut o = Outputs {
                dir,
                ledger,
                snapshots: 0,
            };
            o.snapshot(problem, &integ, &state)?;
            Some(o)
        }
        None => None,
    };
    let interval = problem.output_interval;
    let mut next_output = interval;
    let mut max_residual = 0.0f64;
    let mut last_snapshot_step = 0;
    let mut total = StepStats::default();
    let mut advance = || -> Result<()> {
        while state.t < problem.t_end * (1.0 - 1e-14) {
            let h = dt.min(problem.t_end - state.t);
            total.merge(&integ.step(&mut state, h)?);
            let sum = integ.op.disc.total(&state.u);
            max_residual = max_residual.max(state.ledger.residual(&sum));
            if let Some(o) = outputs.as_mut() {
                o.ledger.row(state.steps, state.t, &sum, &state.ledger)?;
                if interval > 0.0 && state.t >= next_output * (1.0 - 1e-12) {
                    o.snapshot(problem, &integ, &state)?;
                    last_snapshot_step = state.steps;
                    while next_output <= state.t * (1.0 + 1e-12) {
                        next_output += interval;
                    }
                }
            }
        }
        Ok(())
    };
    if let Err(e) = advance() {
        if let Some(o) = outputs.as_mut() {
            o.ledger.flush()?;
        }
        return Err(e.at(format!(
            "{} at t = {:e} (step {})",
            problem.kind, state.t, state.steps
        )));
    }
    let metrics = problem.metrics(&integ, &state)?;
    let mut report = RunReport {
        problem: problem.kind.to_string(),
        grid: problem.grid_summary(),
        t: state.t,
        steps: state.steps,
        dt,
        ledger_residual: integ.ledger_residual(&state),
        max_ledger_residual: max_residual,
        min_scaled_gamma: total.min_scaled_gamma,
        min_average_gamma: total.min_average_gamma,
        limited_elements: total.limited_elements,
        tvd_limited_lines: total.tvd_limited_lines,
        transport_evaluations: total.transport_evaluations,
        c2p_iterations: total.c2p_iterations,
        collision_iterations: total.collision_iterations,
        snapshots: 0,
        metrics,
    };
    if let Some(o) = outputs.as_mut() {
        o.ledger.flush()?;
        if last_snapshot_step != state.steps {
            o.snapshot(problem, &integ, &state)?;
        }
        let op = &integ.op;
        let mut cache = op.new_cache();
        op.recover_nodes(&state.u, &mut cache)?;
        let grey = grey_moments(&op.disc, &op.fluid, &state.u, &cache.nodes)?;
        write_grey(&o.dir.join("grey.csv"), problem, state.t, &grey)?;
        report.snapshots = o.snapshots;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        let path = o.dir.join("report.json");
        std::fs::write(&path, json).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub dt: f64,
    pub l2_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log Δx.
    pub slope: f64,
}

/// Repeats the configured problem on each element count and fits the error decay.
pub fn convergence(cfg: &RunConfig, cells: &[usize]) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(cells.len());
    for &n in cells {
        let mut c = cfg.clone();
        c.cells = Some(vec![n]);
        let rep = run(&c, None)?;
        let err = *rep
            .metrics
            .get("l2_error_j")
            .ok_or_else(|| Error::Config(format!("{} has no analytic reference", rep.problem)))?;
        rows.push(ConvergenceRow {
            cells: n,
            dt: rep.dt,
            l2_error: err,
        });
    }
    let errs: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    Ok(ConvergenceReport {
        slope: convergence_slope(cells, &errs),
        rows,
    })
}
