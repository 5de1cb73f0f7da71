//! Run configuration read from a TOML key-value file.
//!
//! Every key is optional; unset keys take the benchmark's default. A minimal file is
//!
//! ```toml
//! problem = "doppler"
//! v_max = 0.3
//! ```
//!
//! Recognized keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `problem` | `sine-wave`, `diffusion-1`, `diffusion-2`, `doppler`, `transparent-shock`, `shadow`, `vortex` |
//! | `cells` | spatial element counts, one entry per axis |
//! | `lo`, `hi` | spatial domain bounds, one entry per axis |
//! | `energy_cells`, `energy_max`, `energy_ratio` | energy grid; ratio 1 gives uniform widths |
//! | `degree`, `energy_degree` | polynomial degree in space and in energy |
//! | `integrator` | `ssprk2`, `ssprk3`, `pd-ars` |
//! | `t_end`, `cfl`, `dt` | final time, safety factor on the realizable step, fixed step override |
//! | `v_max` | peak fluid speed (uniform speed for sine-wave and diffusion problems) |
//! | `length_scale` | width of the transparent-shock velocity ramp |
//! | `sigma` | scattering opacity of the diffusion problems |
//! | `boundary_x`, `boundary_y` | `[low, high]` face rules: `periodic`, `outflow`, `reflecting`, `inflow` |
//! | `energy_boundary` | `closed` or `open` |
//! | `output_interval` | time between snapshots; 0 writes only the initial and final states |
//! | `seed` | RNG seed (studies only; runs are deterministic) |
//! | `long` | full-resolution grids instead of desk-scale ones |
//! | `[solver]` | `tol_c2p`, `tol_coll`, `max_iters`, `tolerance` (`absolute` or `relative`) |
//! | `[limiter]` | `tvd`, `beta_tvd`, `bisection_tol`, `max_bisection` |

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::problems::ProblemKind;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub cells: Option<Vec<usize>>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub energy_cells: Option<usize>,
    pub energy_max: Option<f64>,
    pub energy_ratio: Option<f64>,
    pub degree: Option<usize>,
    pub energy_degree: Option<usize>,
    pub integrator: Option<String>,
    pub t_end: Option<f64>,
    pub cfl: Option<f64>,
    pub dt: Option<f64>,
    pub v_max: Option<f64>,
    pub length_scale: Option<f64>,
    pub sigma: Option<f64>,
    pub boundary_x: Option<[String; 2]>,
    pub boundary_y: Option<[String; 2]>,
    pub energy_boundary: Option<String>,
    pub output_interval: Option<f64>,
    pub seed: u64,
    pub long: bool,
    pub solver: SolverSection,
    pub limiter: LimiterSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_c2p: Option<f64>,
    pub tol_coll: Option<f64>,
    pub max_iters: Option<usize>,
    pub tolerance: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimiterSection {
    pub tvd: Option<bool>,
    pub beta_tvd: Option<f64>,
    pub bisection_tol: Option<f64>,
    pub max_bisection: Option<usize>,
}

impl RunConfig {
    pub fn for_problem(problem: ProblemKind) -> Self {
        Self {
            problem,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.at(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let cfg = RunConfig::parse(
            "problem = \"transparent-shock\"\nv_max = -0.5\ncells = [60]\n\n[solver]\ntol_c2p = 1e-10\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemKind::TransparentShock);
        assert_eq!(cfg.v_max, Some(-0.5));
        assert_eq!(cfg.cells, Some(vec![60]));
        assert_eq!(cfg.solver.tol_c2p, Some(1e-10));
        assert_eq!(cfg.limiter, LimiterSection::default());
        assert!(!cfg.long);
    }

    #[test]
    fn rejects_unknown_keys_and_problems() {
        assert!(RunConfig::parse("problm = \"doppler\"").is_err());
        assert!(RunConfig::parse("problem = \"tidal\"").is_err());
        assert!(RunConfig::parse("[solver]\ntol = 1.0").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::for_problem(ProblemKind::Vortex);
        cfg.cells = Some(vec![8, 8]);
        cfg.boundary_y = Some(["reflecting".into(), "reflecting".into()]);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
