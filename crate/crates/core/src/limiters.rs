//! Element-local limiters: the realizability-enforcing θ₁/θ₂ blend toward the cell
//! average, and an optional minmod-type TVD slope limiter in position space.
//!
//! Both preserve ε²-weighted cell averages. The realizability limiter inspects the
//! tensor-product point set S̃⊗: the Gauss nodes, Lobatto-in-ε × Gauss-in-x, and for
//! each spatial axis Gauss-in-ε × Lobatto-along-the-axis × Gauss-across.

use rayon::prelude::*;

use crate::dg::fluid::line_node;
use crate::dg::{DGField, Discretization};
use crate::error::{Error, Result};
use crate::moments::{Conserved, REALIZABILITY_TOL};

/// A point u is troubled when γ(u) < −TROUBLED_TOL·min(E(u), E_K) and is limited back
/// onto that line. Smaller excursions are round-off drift of boundary states (beams
/// with |F| = E), where pulling to γ = 0 would flatten the element for a 1e-16
/// mismatch. Scaling by the point's own E keeps low-E nodes recoverable; capping at
/// E_K keeps the post-limiter bound relative to the cell average.
pub const TROUBLED_TOL: f64 = 5e-14;

#[inline]
fn gamma_floor(u: &Conserved, ek: f64) -> f64 {
    -TROUBLED_TOL * u.e.min(ek)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimiterConfig {
    pub enable_tvd: bool,
    pub beta_tvd: f64,
    pub bisection_tol: f64,
    pub max_bisection: usize,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        Self {
            enable_tvd: false,
            beta_tvd: 1.25,
            bisection_tol: 1e-12,
            max_bisection: 100,
        }
    }
}

impl LimiterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.beta_tvd) {
            return Err(Error::Domain {
                what: "beta_tvd",
                value: self.beta_tvd,
            });
        }
        if !(self.bisection_tol > 0.0) || self.max_bisection == 0 {
            return Err(Error::Config(
                "bisection needs a positive tolerance and budget".into(),
            ));
        }
        Ok(())
    }
}

/// θ parameters applied to one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thetas {
    pub theta1: f64,
    pub theta2: f64,
}

impl Thetas {
    pub const IDENTITY: Thetas = Thetas {
        theta1: 1.0,
        theta2: 1.0,
    };
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LimiterReport {
    pub limited_elements: usize,
    pub min_theta1: f64,
    pub min_theta2: f64,
    /// Post-limiter minimum of γ/E_K over S̃⊗ of every element.
    pub min_scaled_gamma: f64,
}

/// Interpolation rows from element nodes to every point of S̃⊗.
#[derive(Clone, Debug)]
pub struct RealizabilityLimiter {
    rows: Vec<Vec<(usize, f64)>>,
    cfg: LimiterConfig,
}

fn push_tensor(
    rows: &mut Vec<Vec<(usize, f64)>>,
    disc: &Discretization,
    e_rows: &[Vec<f64>],
    x_rows: [&[Vec<f64>]; 2],
) {
    let ne = disc.n_energy_nodes();
    let nq = disc.n_space_nodes();
    let one = [vec![1.0]];
    let y_rows: &[Vec<f64>] = if disc.dim() == 2 { x_rows[1] } else { &one };
    for ry in y_rows {
        for rx in x_rows[0] {
            for re in e_rows {
                let mut row = Vec::new();
                for (q1, &wy) in ry.iter().enumerate() {
                    for (q0, &wx) in rx.iter().enumerate() {
                        for (p, &we) in re.iter().enumerate() {
                            let w = we * wx * wy;
                            if w != 0.0 {
                                row.push((p + ne * (q0 + nq * q1), w));
                            }
                        }
                    }
                }
                rows.push(row);
            }
        }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

impl RealizabilityLimiter {
    pub fn new(disc: &Discretization, cfg: LimiterConfig) -> Self {
        let ie = identity(disc.n_energy_nodes());
        let ix = identity(disc.n_space_nodes());
        let le = &disc.energy.to_lobatto;
        let lx = &disc.space.to_lobatto;
        let mut rows = Vec::new();
        push_tensor(&mut rows, disc, &ie, [&ix, &ix]);
        push_tensor(&mut rows, disc, le, [&ix, &ix]);
        push_tensor(&mut rows, disc, &ie, [lx, &ix]);
        if disc.dim() == 2 {
            push_tensor(&mut rows, disc, &ie, [&ix, lx]);
        }
        Self { rows, cfg }
    }

    pub fn n_points(&self) -> usize {
        self.rows.len()
    }

    pub fn config(&self) -> &LimiterConfig {
        &self.cfg
    }

    fn eval(&self, values: &[Conserved]) -> Vec<Conserved> {
        self.rows
            .iter()
            .map(|row| {
                let mut u = Conserved::default();
                for &(a, w) in row {
                    u += values[a] * w;
                }
                u
            })
            .collect()
    }

    /// Minimum of γ/E_K over S̃⊗ for one element.
    pub fn min_scaled_gamma(&self, values: &[Conserved], e_avg: f64) -> f64 {
        self.eval(values)
            .iter()
            .fold(f64::INFINITY, |m, u| m.min(u.gamma() / e_avg))
    }

    /// Limits one element in place given its cell average.
    pub fn limit_element(&self, values: &mut [Conserved], avg: &Conserved) -> Result<Thetas> {
        self.limit_checked(values, avg).map(|(t, _)| t)
    }

    /// As [`Self::limit_element`], also returning the post-limiter minimum of γ/E_K.
    fn limit_checked(&self, values: &mut [Conserved], avg: &Conserved) -> Result<(Thetas, f64)> {
        let ek = avg.e;
        let gk = avg.gamma();
        if !(ek > 0.0) || gk < -REALIZABILITY_TOL * ek {
            return Err(Error::NonRealizable {
                what: "cell average",
                gamma: gk,
                scale: ek,
            });
        }
        let mut points = self.eval(values);
        let m_s = points.iter().fold(f64::INFINITY, |m, u| m.min(u.e));
        let theta1 = if m_s < -TROUBLED_TOL * ek {
            (ek / (ek - m_s)).abs().min(1.0)
        } else {
            1.0
        };
        if theta1 < 1.0 {
            for u in values.iter_mut() {
                u.e = theta1 * u.e + (1.0 - theta1) * ek;
            }
            for u in points.iter_mut() {
                u.e = theta1 * u.e + (1.0 - theta1) * ek;
            }
        }
        let mut theta2: f64 = 1.0;
        let mut min_gamma = f64::INFINITY;
        for u in &points {
            let g = u.gamma();
            min_gamma = min_gamma.min(g / ek);
            if g >= gamma_floor(u, ek) {
                continue;
            }
            if gk <= gamma_floor(avg, ek) {
                theta2 = 0.0;
                break;
            }
            // γ − floor along s(ψ) is concave (min of linear maps) and changes sign once.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..self.cfg.max_bisection {
                if hi - lo <= self.cfg.bisection_tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let s = *u * mid + *avg * (1.0 - mid);
                if s.gamma() >= gamma_floor(&s, ek) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            theta2 = theta2.min(lo);
        }
        if theta2 < 1.0 {
            for u in values.iter_mut() {
                *u = *u * theta2 + *avg * (1.0 - theta2);
            }
            min_gamma = self.min_scaled_gamma(values, ek);
        }
        Ok((Thetas { theta1, theta2 }, min_gamma))
    }

    /// Limits every element of `field`.
    pub fn apply(&self, disc: &Discretization, field: &mut DGField) -> Result<LimiterReport> {
        let npe = disc.nodes_per_element();
        let thetas: Vec<(Thetas, f64)> = field
            .data
            .par_chunks_mut(npe)
            .enumerate()
            .map(|(e, values)| {
                let avg = disc.cell_average(e, values);
                self.limit_checked(values, &avg)
                    .map_err(|err| err.at(format!("element {e}")))
            })
            .collect::<Result<_>>()?;
        let mut report = LimiterReport {
            limited_elements: 0,
            min_theta1: 1.0,
            min_theta2: 1.0,
            min_scaled_gamma: f64::INFINITY,
        };
        for (t, g) in thetas {
            report.min_scaled_gamma = report.min_scaled_gamma.min(g);
            if t != Thetas::IDENTITY {
                report.limited_elements += 1;
            }
            report.min_theta1 = report.min_theta1.min(t.theta1);
            report.min_theta2 = report.min_theta2.min(t.theta2);
        }
        Ok(report)
    }

    /// Smallest γ/E_K over every element's point set, for post-limiter checks.
    pub fn min_scaled_gamma_field(&self, disc: &Discretization, field: &DGField) -> f64 {
        (0..disc.mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let values = field.element(e);
                let avg = disc.cell_average(e, values);
                self.min_scaled_gamma(values, avg.e)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }
}

/// minmod(a, b, c): the smallest-magnitude argument when all share a sign, else 0.
pub fn minmod(args: &[f64]) -> f64 {
    let s = args[0].signum();
    if args.iter().any(|&x| x == 0.0 || x.signum() != s) {
        return 0.0;
    }
    s * args.iter().fold(f64::INFINITY, |m, &x| m.min(x.abs()))
}

/// Per spatial line (fixed energy node and transverse node), limits the linear
/// modal slope component-wise against β times the differences of neighboring line
/// averages. Clipped components are replaced by their limited linear part.
pub fn tvd_minmod(
    disc: &Discretization,
    neighbor: impl Fn(usize, usize, usize) -> Option<usize> + Sync,
    field: &mut DGField,
    beta: f64,
) -> usize {
    let mesh = &disc.mesh;
    let ne = disc.n_energy_nodes();
    let nq = disc.n_space_nodes();
    let ntr = if disc.dim() == 2 { nq } else { 1 };
    let npe = disc.nodes_per_element();
    let w = &disc.space.weights;
    let xi = &disc.space.nodes;
    // Linear modal coefficient against (ξ − ½): 12·Σ w_j U_j (ξ_j − ½), exact for k ≥ 1.
    let slope_w: Vec<f64> = (0..nq).map(|j| 12.0 * w[j] * (xi[j] - 0.5)).collect();
    if nq < 2 {
        return 0;
    }
    let mut limited = 0;
    for axis in 0..disc.dim() {
        let line_avg: Vec<Conserved> = (0..mesh.n_elements())
            .into_par_iter()
            .flat_map_iter(|e| {
                let ue = field.element(e);
                (0..ntr).flat_map(move |t| {
                    (0..ne).map(move |p| {
                        let mut s = Conserved::default();
                        for j in 0..nq {
                            s += ue[p + ne * line_node(nq, axis, j, t)] * w[j];
                        }
                        s
                    })
                })
            })
            .collect();
        let fp = ne * ntr;
        limited += field
            .data
            .par_chunks_mut(npe)
            .enumerate()
            .map(|(e, ue)| {
                let (ks, ie) = mesh.split(e);
                let lo = neighbor(ks, axis, 0).map(|k| mesh.element(k, ie));
                let hi = neighbor(ks, axis, 1).map(|k| mesh.element(k, ie));
                let mut any = false;
                for t in 0..ntr {
                    for p in 0..ne {
                        let pt = p + ne * t;
                        let avg = line_avg[e * fp + pt].to_array();
                        let dm = lo.map(|n| line_avg[n * fp + pt].to_array());
                        let dp = hi.map(|n| line_avg[n * fp + pt].to_array());
                        let mut vals: Vec<[f64; 4]> = (0..nq)
                            .map(|j| ue[p + ne * line_node(nq, axis, j, t)].to_array())
                            .collect();
                        for c in 0..4 {
                            let s: f64 = (0..nq).map(|j| slope_w[j] * vals[j][c]).sum();
                            let mut args = vec![s];
                            if let Some(m) = dm {
                                args.push(beta * (avg[c] - m[c]));
                            }
                            if let Some(pl) = dp {
                                args.push(beta * (pl[c] - avg[c]));
                            }
                            let sl = minmod(&args);
                            if sl != s {
                                any = true;
                                for j in 0..nq {
                                    vals[j][c] = avg[c] + sl * (xi[j] - 0.5);
                                }
                            }
                        }
                        for j in 0..nq {
                            ue[p + ne * line_node(nq, axis, j, t)] = Conserved::from_array(vals[j]);
                        }
                    }
                }
                usize::from(any)
            })
            .sum::<usize>();
    }
    limited
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{geometric_edges, PhaseSpaceMesh};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn disc(dim: usize, n: usize, ke: usize, kx: usize) -> Discretization {
        let mesh = PhaseSpaceMesh::new(
            dim,
            [n, n],
            [0.0; 2],
            [1.0; 2],
            geometric_edges(0.0, 4.0, 2, 1.5).unwrap(),
        )
        .unwrap();
        Discretization::new(mesh, ke, kx)
    }

    #[test]
    fn point_set_size() {
        // k_ε = 1, k_x = 2, d = 2: 18 nodes, 4·9 Lobatto-ε, 2·(2·3·3) Lobatto-x.
        let d = disc(2, 1, 1, 2);
        let l = RealizabilityLimiter::new(&d, LimiterConfig::default());
        let (me, mx) = (d.energy.lobatto_nodes.len(), d.space.lobatto_nodes.len());
        assert_eq!((me, mx), (3, 3));
        assert_eq!(l.n_points(), 18 + me * 9 + 2 * 2 * mx * 3);
    }

    #[test]
    fn realizable_field_is_untouched() {
        let d = disc(1, 2, 2, 2);
        let l = RealizabilityLimiter::new(&d, LimiterConfig::default());
        let mut f = d.project(|eps, x| Conserved::new(1.0 + eps + x[0], [0.3, 0.1, 0.0]));
        let before = f.clone();
        let r = l.apply(&d, &mut f).unwrap();
        assert_eq!(r.limited_elements, 0);
        assert_eq!(f, before);
    }

    #[test]
    fn theta1_from_minimum_energy() {
        // E_K = 1 with a nodal minimum of −0.5: θ₁ = |(0 − 1)/(−0.5 − 1)| = 2/3.
        let l = RealizabilityLimiter {
            rows: vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            cfg: LimiterConfig::default(),
        };
        let mut vals = vec![Conserved::new(2.5, [0.0; 3]), Conserved::new(-0.5, [0.0; 3])];
        let avg = Conserved::new(1.0, [0.0; 3]);
        let t = l.limit_element(&mut vals, &avg).unwrap();
        assert_relative_eq!(t.theta1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(t.theta2, 1.0);
        assert_relative_eq!(vals[1].e, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn boundary_point_is_admissible() {
        let l = RealizabilityLimiter {
            rows: vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            cfg: LimiterConfig::default(),
        };
        let mut vals = vec![
            Conserved::new(1.0, [1.0, 0.0, 0.0]),
            Conserved::new(1.0, [0.0; 3]),
        ];
        let avg = Conserved::new(1.0, [0.5, 0.0, 0.0]);
        assert_eq!(l.limit_element(&mut vals, &avg).unwrap(), Thetas::IDENTITY);
    }

    #[test]
    fn nonrealizable_average_is_an_error() {
        let l = RealizabilityLimiter {
            rows: vec![vec![(0, 1.0)]],
            cfg: LimiterConfig::default(),
        };
        let mut vals = vec![Conserved::new(1.0, [1.5, 0.0, 0.0])];
        let avg = vals[0];
        assert_eq!(
            l.limit_element(&mut vals, &avg).unwrap_err().kind(),
            "non-realizable"
        );
    }

    #[test]
    fn minmod_arithmetic() {
        assert_eq!(minmod(&[1.0, 2.0, 0.5]), 0.5);
        assert_eq!(minmod(&[-1.0, -2.0, -0.5]), -0.5);
        assert_eq!(minmod(&[1.0, -2.0, 0.5]), 0.0);
        assert_eq!(minmod(&[0.0, 2.0]), 0.0);
    }

    #[test]
    fn tvd_leaves_linear_data_and_clips_a_spike() {
        let d = disc(1, 3, 0, 1);
        let periodic = |ks: usize, _: usize, side: usize| Some((ks + if side == 0 { 2 } else { 1 }) % 3);
        let none = |_: usize, _: usize, _: usize| None;
        let bounded = |ks: usize, _: usize, side: usize| {
            if side == 0 {
                ks.checked_sub(1)
            } else {
                (ks + 1 < 3).then_some(ks + 1)
            }
        };
        let mut f = d.project(|_, x| Conserved::new(2.0 + x[0], [0.5 * x[0], 0.0, 0.0]));
        let before = f.clone();
        assert_eq!(tvd_minmod(&d, none, &mut f, 1.25), 0);
        assert_eq!(f, before);

        // Averages (0, 1, 0) and a slope of 3 in the middle: envelope β·1 = 1.25 on the
        // left, β·(−1) on the right, so the slope drops to 0.
        let mut g = d.project(|_, x| {
            let v = if (1.0 / 3.0..2.0 / 3.0).contains(&x[0]) {
                1.0 + 9.0 * (x[0] - 0.5)
            } else {
                0.0
            };
            Conserved::new(v, [0.0; 3])
        });
        tvd_minmod(&d, periodic, &mut g, 1.25);
        let mid = d.mesh.element(1, 0);
        for a in 0..2 {
            assert_relative_eq!(g.element(mid)[a].e, 1.0, epsilon = 1e-14);
        }
        // Monotone ramp 0, 1, 3 with a steep middle slope 3: clipped to min(3, 1.25, 2.5).
        let ramp = [0.0, 1.0, 3.0];
        let mut h = d.project(|_, x| {
            let c = ((x[0] * 3.0) as usize).min(2);
            let off = if c == 1 { 3.0 * (x[0] * 3.0 - 1.5) } else { 0.0 };
            Conserved::new(ramp[c] + off, [0.0; 3])
        });
        tvd_minmod(&d, bounded, &mut h, 1.25);
        let xi = d.space.nodes[0];
        assert_relative_eq!(h.element(mid)[0].e, 1.0 + 1.25 * (xi - 0.5), epsilon = 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn limiter_enforces_realizability_preserves_averages_and_is_idempotent(
            seed in prop::collection::vec((-1.0..1.0f64, -1.5..1.5f64, -1.5..1.5f64, -1.0..1.0f64), 18),
            dim in 1usize..=2,
        ) {
            let d = disc(dim, 1, 1, 2);
            let l = RealizabilityLimiter::new(&d, LimiterConfig::default());
            let npe = d.nodes_per_element();
            for e in 0..d.mesh.n_elements() {
                let mut f = d.zeros();
                for a in 0..npe {
                    let (x, y, z, w) = seed[a % seed.len()];
                    f.element_mut(e)[a] = Conserved::new(1.0 + x, [0.8 * y, 0.3 * z, 0.2 * w]);
                }
                let avg = d.cell_average(e, f.element(e));
                prop_assume!(avg.e > 0.0 && avg.gamma() > 1e-3 * avg.e);
                let mut vals = f.element(e).to_vec();
                l.limit_element(&mut vals, &avg).unwrap();
                let after = d.cell_average(e, &vals);
                for c in 0..4 {
                    prop_assert!((after.to_array()[c] - avg.to_array()[c]).abs() <= 1e-14 * avg.norm() * 4.0);
                }
                prop_assert!(l.min_scaled_gamma(&vals, avg.e) >= -REALIZABILITY_TOL);
                let once = vals.clone();
                let t = l.limit_element(&mut vals, &after).unwrap();
                prop_assert_eq!(t, Thetas::IDENTITY);
                prop_assert_eq!(once, vals);
            }
        }
    }
}
