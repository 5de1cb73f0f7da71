//! Benchmark harness: configuration, problem catalog, diagnostics, output files,
//! the run driver and the solver studies.

pub mod config;
pub mod diagnostics;
pub mod io;
pub mod problems;
pub mod run;
pub mod studies;

pub use config::RunConfig;
pub use problems::{Problem, ProblemKind};
pub use run::{convergence, run, run_problem, ConvergenceReport, RunReport};
