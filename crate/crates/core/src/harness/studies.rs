//! Solver studies: recovery iteration counts, sharpness of the energy-flux speed
//! bound, and the contraction threshold of the fixed-point recovery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::dg::{a_eps_max, VelocityGradient};
use crate::kinematics::{boost_direction, comoving_unit_direction, BoostMatrix, FourVector, ThreeVelocity};
use crate::moments::{hat_from_primitive, Primitive};
use crate::solvers::{
    c2p_newton, c2p_picard, contraction_constant, critical_contraction_speed, SolveReport, SolverConfig,
    StepMode,
};

/// Iteration statistics of one recovery method at one (v, h) grid point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MethodStats {
    /// Mean iterations over converged samples; `None` when none converged.
    pub mean: Option<f64>,
    pub max: usize,
    pub failures: usize,
    /// Iterates that left the realizable set, summed over samples.
    pub nonrealizable: usize,
}

impl MethodStats {
    fn collect(results: &[Option<SolveReport>]) -> Self {
        let ok: Vec<&SolveReport> = results.iter().flatten().collect();
        Self {
            mean: (!ok.is_empty())
                .then(|| ok.iter().map(|r| r.iterations as f64).sum::<f64>() / ok.len() as f64),
            max: ok.iter().map(|r| r.iterations).max().unwrap_or(0),
            failures: results.len() - ok.len(),
            nonrealizable: ok.iter().map(|r| r.nonrealizable_iterates).sum(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct C2pRow {
    pub v: f64,
    pub h: f64,
    /// Picard with the damped step 1/(W(1+v)).
    pub picard: MethodStats,
    /// Picard with the undamped step 1/(1+v).
    pub aggressive: MethodStats,
    pub newton: MethodStats,
}

/// `n` evenly spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn unit_vector<R: Rng>(rng: &mut R) -> [f64; 3] {
    let th = rng.random_range(0.0..=PI);
    let ph = rng.random_range(0.0..2.0 * PI);
    [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
}

/// A realizable sample with speed `v` and flux factor `h`: J = cos α/(1 − sin α) for
/// uniform α, random velocity and comoving flux directions.
pub fn sample_moments<R: Rng>(rng: &mut R, v: f64, h: f64) -> (ThreeVelocity, Primitive) {
    let alpha = rng.random_range(-0.5 * PI..0.5 * PI);
    let j = alpha.cos() / (1.0 - alpha.sin());
    let vel = ThreeVelocity::new(unit_vector(rng).map(|c| c * v)).expect("speed below one");
    let n = unit_vector(rng);
    let hc = FourVector([0.0, j * h * n[0], j * h * n[1], j * h * n[2]]);
    let hl = BoostMatrix::new(&vel).apply(&hc);
    (vel, Primitive::new(j, hl.space()))
}

fn cell_seed(seed: u64, cell: usize) -> u64 {
    seed ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Recovery iteration table over the (v, h) grid; each cell draws `samples` moments
/// from its own seeded stream, so the table does not depend on the thread count.
pub fn study_c2p(
    v_grid: &[f64],
    h_grid: &[f64],
    samples: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Vec<C2pRow> {
    let cells: Vec<(usize, f64, f64)> = v_grid
        .iter()
        .flat_map(|&v| h_grid.iter().map(move |&h| (v, h)))
        .enumerate()
        .map(|(i, (v, h))| (i, v, h))
        .collect();
    let picard_cfg = SolverConfig {
        step_mode: StepMode::Realizable,
        ..*cfg
    };
    let aggressive_cfg = SolverConfig {
        step_mode: StepMode::Aggressive,
        ..*cfg
    };
    cells
        .par_iter()
        .map(|&(i, v, h)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, i));
            let mut runs: [Vec<Option<SolveReport>>; 3] = Default::default();
            for _ in 0..samples {
                let (vel, m) = sample_moments(&mut rng, v, h);
                let uh = hat_from_primitive(&m, &vel);
                runs[0].push(c2p_picard(&uh, &vel, &picard_cfg).ok().map(|r| r.1));
                runs[1].push(c2p_picard(&uh, &vel, &aggressive_cfg).ok().map(|r| r.1));
                runs[2].push(c2p_newton(&uh, &vel, cfg).ok().map(|r| r.1));
            }
            C2pRow {
                v,
                h,
                picard: MethodStats::collect(&runs[0]),
                aggressive: MethodStats::collect(&runs[1]),
                newton: MethodStats::collect(&runs[2]),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AepsRow {
    pub length: f64,
    pub v: f64,
    pub bound: f64,
    /// max over sampled directions of |k^ν k^ρ A_νρ|.
    pub sampled_max: f64,
    /// (bound − sampled_max) / sampled_max.
    pub slack: f64,
}

/// |v| limits below which the slack must stay under the paired value.
pub const AEPS_THRESHOLDS: [(f64, f64); 3] = [(0.004, 1e-2), (0.048, 1e-1), (0.334, 1.0)];

/// Gradient of v = (v, 0, 0) with ∂ₓvⁱ = vⁱ/L: ∂ₓW = W³v²/L and ∂ₓ(Wv) = W³v/L.
pub fn scaled_gradient(v: f64, length: f64) -> VelocityGradient {
    let w3 = (1.0 - v * v).powf(-1.5);
    VelocityGradient {
        dw: [w3 * v * v / length, 0.0, 0.0],
        dwv: [[w3 * v / length, 0.0, 0.0], [0.0; 3], [0.0; 3]],
    }
}

/// Bound slack for every (L, v) pair; `v = 0` is skipped since both sides vanish.
/// Each velocity draws one set of directions, reused for every L, so the slack is
/// independent of L up to roundoff (q and the bound both scale as 1/L).
pub fn study_aeps(lengths: &[f64], velocities: &[f64], samples: usize, seed: u64) -> Vec<AepsRow> {
    let pairs: Vec<(usize, f64, f64)> = lengths
        .iter()
        .flat_map(|&l| {
            velocities
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(i, &v)| (i, l, v))
        })
        .collect();
    pairs
        .par_iter()
        .map(|&(i, length, v)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, i));
            let vel = ThreeVelocity::along_x(v).expect("speed below one");
            let g = scaled_gradient(v, length);
            let a = g.strain();
            let u = vel.four_velocity();
            let mut sampled_max = 0.0f64;
            for _ in 0..samples {
                let th = rng.random_range(0.0..=PI);
                let ph = rng.random_range(0.0..2.0 * PI);
                let l = boost_direction(&comoving_unit_direction(th, ph), &vel);
                let k = [0, 1, 2, 3].map(|m| u.0[m] + l.0[m]);
                let mut q = 0.0;
                for (nu, row) in a.iter().enumerate() {
                    for (rho, x) in row.iter().enumerate() {
                        q += k[nu] * k[rho] * x;
                    }
                }
                sampled_max = sampled_max.max(q.abs());
            }
            let bound = a_eps_max(&vel, &g);
            AepsRow {
                length,
                v,
                bound,
                sampled_max,
                slack: (bound - sampled_max) / sampled_max,
            }
        })
        .collect()
}

/// Rows whose slack exceeds the threshold for their speed.
pub fn aeps_violations(rows: &[AepsRow]) -> Vec<AepsRow> {
    rows.iter()
        .filter(|r| {
            AEPS_THRESHOLDS
                .iter()
                .any(|&(vl, s)| r.v.abs() < vl && !(r.slack < s))
        })
        .copied()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    /// Largest v with L̃(v) < W(v).
    pub critical_speed: f64,
    pub probes: [(f64, f64, f64, bool); 2],
}

/// Bisection for the contraction threshold plus the probes at v = 0.1 and 0.5.
pub fn study_contraction(tol: f64) -> ContractionReport {
    let probe = |v: f64| {
        let (l, w, ok) = contraction_constant(v).expect("speed in [0, 1)");
        (v, l, w, ok)
    };
    ContractionReport {
        critical_speed: critical_contraction_speed(tol),
        probes: [probe(0.1), probe(0.5)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn samples_hit_the_target_flux_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(v, h) in &[(0.0, 0.0), (0.5, 0.7), (0.97, 1.0)] {
            for _ in 0..20 {
                let (vel, m) = sample_moments(&mut rng, v, h);
                assert_relative_eq!(vel.speed(), v, epsilon = 1e-14);
                assert_relative_eq!(
                    m.flux_magnitude(&vel),
                    h * m.j,
                    max_relative = 1e-10,
                    epsilon = 1e-13
                );
                assert!(m.j > 0.0);
            }
        }
    }

    #[test]
    fn rest_row_converges_in_one_iteration() {
        let rows = study_c2p(&[0.0], &linspace(0.0, 1.0, 5), 10, 1, &SolverConfig::default());
        for r in rows {
            assert_eq!(r.picard.mean, Some(1.0));
            assert_eq!(r.picard.failures, 0);
        }
    }

    #[test]
    fn table_is_seed_deterministic() {
        let cfg = SolverConfig::default();
        let a = study_c2p(&[0.3, 0.6], &[0.2, 0.9], 8, 42, &cfg);
        let b = study_c2p(&[0.3, 0.6], &[0.2, 0.9], 8, 42, &cfg);
        assert_eq!(a, b);
        let c = study_c2p(&[0.3, 0.6], &[0.2, 0.9], 8, 43, &cfg);
        assert_ne!(a, c);
    }

    #[test]
    fn gradient_oracle() {
        // Finite differences of W(v(x)) and W(x)v(x) with v(x) = v₀e^{x/L}, so ∂ₓv = v/L.
        let (v0, l) = (0.4, 2.0);
        let vf = |x: f64| v0 * (x / l).exp();
        let wf = |x: f64| 1.0 / (1.0 - vf(x).powi(2)).sqrt();
        let hstep = 1e-6;
        let dw = (wf(hstep) - wf(-hstep)) / (2.0 * hstep);
        let dwv = (wf(hstep) * vf(hstep) - wf(-hstep) * vf(-hstep)) / (2.0 * hstep);
        let g = scaled_gradient(v0, l);
        assert_relative_eq!(g.dw[0], dw, max_relative = 1e-8);
        assert_relative_eq!(g.dwv[0][0], dwv, max_relative = 1e-8);
    }

    #[test]
    fn bound_dominates_samples() {
        let rows = study_aeps(&[1e-2, 1.0], &linspace(-0.9, 0.9, 13), 50, 9);
        assert_eq!(rows.len(), 2 * 12);
        for r in rows {
            assert!(r.slack >= -1e-12, "{r:?}");
        }
    }

    /// max|q| is attained along ±x, where k = W(1 ± v)(1, ±1, 0, 0) and
    /// q = W³v(1 ± v)/L; the bound exceeds it by (1 + |v|)/(1 − |v|).
    fn pole_max(v: f64, l: f64) -> f64 {
        let w3 = (1.0 - v * v).powf(-1.5);
        w3 * v.abs() * (1.0 + v.abs()) / l
    }

    #[test]
    fn slack_has_the_pole_closed_form() {
        for &l in &[1e-4, 1.0, 1e4] {
            for &v in &[-0.9, -0.3, -0.003, 0.001, 0.0475, 0.3333, 0.7] {
                let r = study_aeps(&[l], &[v], 20_000, 5)[0];
                let q = pole_max(v, l);
                assert_relative_eq!(
                    r.bound,
                    q * (1.0 + v.abs()) / (1.0 - v.abs()),
                    max_relative = 1e-12
                );
                assert!(r.sampled_max <= q * (1.0 + 1e-12), "{r:?}");
                assert!(r.sampled_max >= q * (1.0 - 1e-3), "{r:?}");
            }
        }
    }

    #[test]
    fn slack_does_not_depend_on_length() {
        let vs = linspace(-0.95, 0.95, 20);
        let rows = study_aeps(&[1e-4, 1e4], &vs, 100, 11);
        let (a, b) = rows.split_at(vs.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.v, y.v);
            assert_relative_eq!(x.slack, y.slack, max_relative = 1e-9);
        }
    }

    #[test]
    fn contraction_probes() {
        let rep = study_contraction(1e-10);
        assert!(rep.probes[0].3);
        assert!(!rep.probes[1].3);
        assert!(rep.critical_speed > 0.1 && rep.critical_speed < 0.5);
    }
}
