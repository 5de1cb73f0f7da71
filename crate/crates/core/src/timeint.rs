//! Shu–Osher stage loop for SSP-RK and the IMEX PD-ARS scheme, the realizable
//! time step, and the conservation ledger carried through the stages.
//!
//! Stage i is u⁽ⁱ⁾ = Σⱼ cᵢⱼ(u⁽ʲ⁾ + ĉᵢⱼΔt T(u⁽ʲ⁾)) followed by the limiter, then,
//! when aᵢᵢ > 0, a nodal backward-Euler collision solve with Δτ = aᵢᵢΔt and the
//! limiter again. All shipped schemes are globally stiffly accurate, so the step
//! result is the last stage.

use std::str::FromStr;

use rayon::prelude::*;

use crate::dg::{DGField, Discretization, FluidField, PrimitiveCache, TransportOperator};
use crate::error::{Error, Result};
use crate::limiters::{tvd_minmod, LimiterConfig, LimiterReport, RealizabilityLimiter};
use crate::moments::{
    conserved_from_hat, hat_from_conserved, round_onto_cone, Conserved, Primitive, REALIZABILITY_TOL,
};
use crate::solvers::collision_update;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Ssprk2,
    Ssprk3,
    PdArs,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssprk2" => Ok(Scheme::Ssprk2),
            "ssprk3" => Ok(Scheme::Ssprk3),
            "pd-ars" | "pdars" | "imex-pd-ars" => Ok(Scheme::PdArs),
            _ => Err(Error::Config(format!("unknown integrator '{s}'"))),
        }
    }
}

/// Shu–Osher coefficients; row i−1 holds stage i.
#[derive(Clone, Debug, PartialEq)]
pub struct ShuOsher {
    pub c: Vec<Vec<f64>>,
    pub c_hat: Vec<Vec<f64>>,
    /// Implicit diagonal aᵢᵢ per stage.
    pub a_diag: Vec<f64>,
}

impl ShuOsher {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    /// ĉ = min 1/ĉᵢⱼ over the nonzero entries.
    pub fn c_hat_min(&self) -> f64 {
        self.c_hat
            .iter()
            .flatten()
            .filter(|&&x| x > 0.0)
            .fold(f64::INFINITY, |m, &x| m.min(1.0 / x))
    }

    /// Whether T(u⁽ʲ⁾) enters any later stage.
    fn needs_transport(&self, j: usize) -> bool {
        self.c
            .iter()
            .zip(&self.c_hat)
            .skip(j)
            .any(|(c, ch)| c.get(j).is_some_and(|&x| x > 0.0) && ch[j] > 0.0)
    }
}

impl Scheme {
    pub fn tableau(self) -> ShuOsher {
        match self {
            Scheme::Ssprk2 | Scheme::PdArs => ShuOsher {
                c: vec![vec![1.0], vec![0.5, 0.5]],
                c_hat: vec![vec![1.0], vec![0.0, 1.0]],
                a_diag: if self == Scheme::PdArs {
                    vec![1.0, 0.5]
                } else {
                    vec![0.0, 0.0]
                },
            },
            Scheme::Ssprk3 => ShuOsher {
                c: vec![vec![1.0], vec![0.75, 0.25], vec![1.0 / 3.0, 0.0, 2.0 / 3.0]],
                c_hat: vec![vec![1.0], vec![0.0, 1.0], vec![0.0, 0.0, 1.0]],
                a_diag: vec![0.0; 3],
            },
        }
    }

    pub fn is_implicit(self) -> bool {
        self == Scheme::PdArs
    }
}

/// Largest step keeping forward-Euler cell averages realizable, times `safety·ĉ`.
pub fn realizable_dt(disc: &Discretization, fluid: &FluidField, c_hat: f64, safety: f64) -> Result<f64> {
    let mesh = &disc.mesh;
    if mesh.n_elements() == 0 {
        return Err(Error::Config("empty mesh".into()));
    }
    let d1 = (disc.dim() + 1) as f64;
    let mut bound = f64::INFINITY;
    for axis in 0..disc.dim() {
        bound = bound.min(disc.space.lobatto_end_weight() * mesh.dx(axis) / d1);
    }
    // min over energy elements of Δε/ε_H; the ε = 0 element gives 1.
    let ratio = (0..mesh.n_energy())
        .map(|ie| {
            let (lo, hi) = mesh.energy_bounds(ie);
            (hi - lo) / hi
        })
        .fold(f64::INFINITY, f64::min);
    let nsn = disc.spatial_nodes();
    let we = disc.energy.lobatto_end_weight();
    for ks in 0..mesh.n_spatial() {
        let a = fluid.a_eps[ks];
        if a > 0.0 {
            let red = fluid.velocity[ks * nsn..(ks + 1) * nsn]
                .iter()
                .map(|v| v.w() * (1.0 - v.speed()))
                .fold(f64::INFINITY, f64::min);
            bound = bound.min(red * we * ratio / (d1 * a));
        }
    }
    Ok(safety * c_hat * bound)
}

/// Running conservation account: T(u) − T(u₀) = −outflow + source.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Ledger {
    pub initial: Conserved,
    /// Time-integrated mass-weighted flux out of the phase-space domain.
    pub outflow: Conserved,
    /// Time-integrated collision exchange.
    pub source: Conserved,
}

impl Ledger {
    pub fn new(initial: Conserved) -> Self {
        Self {
            initial,
            ..Default::default()
        }
    }

    /// Imbalance vector T − T₀ + outflow − source.
    pub fn imbalance(&self, total: &Conserved) -> Conserved {
        *total - self.initial + self.outflow - self.source
    }

    /// ‖imbalance‖ over the largest of ‖T₀‖, ‖T‖, ‖outflow‖ and ‖source‖.
    pub fn residual(&self, total: &Conserved) -> f64 {
        let scale = self
            .initial
            .norm()
            .max(total.norm())
            .max(self.outflow.norm())
            .max(self.source.norm());
        if scale == 0.0 {
            0.0
        } else {
            self.imbalance(total).norm() / scale
        }
    }

    fn combine(parts: &[(f64, &Ledger)]) -> Ledger {
        let mut out = Ledger::new(parts[0].1.initial);
        out.outflow = Conserved::default();
        for (c, l) in parts {
            out.outflow += l.outflow * *c;
            out.source += l.source * *c;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: DGField,
    pub t: f64,
    pub steps: usize,
    pub ledger: Ledger,
}

/// Work counters and realizability monitors accumulated over steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub transport_evaluations: usize,
    pub c2p_iterations: u64,
    pub collision_iterations: u64,
    pub limited_elements: usize,
    pub tvd_limited_lines: usize,
    /// Smallest post-limiter γ/E_K over S̃⊗ seen at any stage.
    pub min_scaled_gamma: f64,
    /// Smallest cell-average γ/E_K seen at any stage.
    pub min_average_gamma: f64,
}

impl Default for StepStats {
    fn default() -> Self {
        Self {
            transport_evaluations: 0,
            c2p_iterations: 0,
            collision_iterations: 0,
            limited_elements: 0,
            tvd_limited_lines: 0,
            min_scaled_gamma: f64::INFINITY,
            min_average_gamma: f64::INFINITY,
        }
    }
}

impl StepStats {
    pub fn merge(&mut self, o: &StepStats) {
        self.transport_evaluations += o.transport_evaluations;
        self.c2p_iterations += o.c2p_iterations;
        self.collision_iterations += o.collision_iterations;
        self.limited_elements += o.limited_elements;
        self.tvd_limited_lines += o.tvd_limited_lines;
        self.min_scaled_gamma = self.min_scaled_gamma.min(o.min_scaled_gamma);
        self.min_average_gamma = self.min_average_gamma.min(o.min_average_gamma);
    }

    fn absorb_limiter(&mut self, r: &LimiterReport) {
        self.limited_elements += r.limited_elements;
        self.min_scaled_gamma = self.min_scaled_gamma.min(r.min_scaled_gamma);
    }
}

pub struct Integrator {
    pub op: TransportOperator,
    pub scheme: Scheme,
    pub limiter: RealizabilityLimiter,
    tableau: ShuOsher,
    cache: PrimitiveCache,
    collision_guess: Vec<Primitive>,
}

impl Integrator {
    pub fn new(op: TransportOperator, scheme: Scheme, limiter: LimiterConfig) -> Result<Self> {
        limiter.validate()?;
        if scheme.is_implicit() && op.fluid.is_transparent() {
            return Err(Error::Config("the IMEX scheme needs opacities".into()));
        }
        let cache = op.new_cache();
        Ok(Self {
            limiter: RealizabilityLimiter::new(&op.disc, limiter),
            tableau: scheme.tableau(),
            collision_guess: vec![Primitive::default(); op.disc.n_nodes()],
            cache,
            op,
            scheme,
        })
    }

    pub fn disc(&self) -> &Discretization {
        &self.op.disc
    }

    pub fn tableau(&self) -> &ShuOsher {
        &self.tableau
    }

    /// Realizable step with the scheme's ĉ and the given safety factor.
    pub fn realizable_dt(&self, safety: f64) -> Result<f64> {
        realizable_dt(&self.op.disc, &self.op.fluid, self.tableau.c_hat_min(), safety)
    }

    /// Wraps an initial field in a [`State`], limiting it first.
    pub fn initial_state(&self, mut u: DGField) -> Result<State> {
        self.limit(&mut u, &mut StepStats::default())?;
        let total = self.op.disc.total(&u);
        Ok(State {
            u,
            t: 0.0,
            steps: 0,
            ledger: Ledger::new(total),
        })
    }

    /// TVD (when enabled) then the realizability limiter, with cell-average checks.
    fn limit(&self, u: &mut DGField, stats: &mut StepStats) -> Result<()> {
        let disc = &self.op.disc;
        let cfg = self.limiter.config();
        if cfg.enable_tvd {
            let fluid = &self.op.fluid;
            stats.tvd_limited_lines += tvd_minmod(
                disc,
                |ks, axis, side| fluid.neighbor(disc, ks, axis, side),
                u,
                cfg.beta_tvd,
            );
        }
        let (min_avg, worst) = (0..disc.mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let avg = disc.cell_average(e, u.element(e));
                (avg.gamma() / avg.e, e)
            })
            .reduce(
                || (f64::INFINITY, 0),
                |a, b| if b.0 < a.0 || a.0.is_nan() { b } else { a },
            );
        stats.min_average_gamma = stats.min_average_gamma.min(min_avg);
        if !(min_avg >= -REALIZABILITY_TOL) {
            return Err(Error::NonRealizable {
                what: "cell average",
                gamma: min_avg,
                scale: 1.0,
            }
            .at(format!("element {worst}")));
        }
        let report = self.limiter.apply(disc, u)?;
        stats.absorb_limiter(&report);
        Ok(())
    }

    /// Backward-Euler collision solve at every node; returns Σ mass·ΔU.
    fn collide(&mut self, u: &mut DGField, dtau: f64, stats: &mut StepStats) -> Result<Conserved> {
        let disc = &self.op.disc;
        let fluid = &self.op.fluid;
        let solver = &self.op.solver;
        let npe = disc.nodes_per_element();
        let per_element: Vec<(Conserved, u64)> = u
            .data
            .par_chunks_mut(npe)
            .zip(self.collision_guess.par_chunks_mut(npe))
            .enumerate()
            .map(|(e, (ue, guess))| -> Result<(Conserved, u64)> {
                let mut delta = Conserved::default();
                let mut iters = 0;
                for a in 0..npe {
                    let state = fluid.state(disc, e, a);
                    let g = (guess[a].j > 0.0).then_some(guess[a]);
                    let v = &state.v;
                    let start = conserved_from_hat(&round_onto_cone(hat_from_conserved(&ue[a], v), v), v);
                    let (un, m, rep) = collision_update(&start, dtau, &state, g, solver)
                        .map_err(|err| err.at(format!("collision element {e} node {a}")))?;
                    delta += (un - ue[a]) * disc.node_mass(e, a);
                    ue[a] = un;
                    guess[a] = m;
                    iters += rep.iterations as u64;
                }
                Ok((delta, iters))
            })
            .collect::<Result<_>>()?;
        let mut source = Conserved::default();
        for (d, n) in per_element {
            source += d;
            stats.collision_iterations += n;
        }
        Ok(source)
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &mut State, dt: f64) -> Result<StepStats> {
        if !(dt > 0.0) {
            return Err(Error::Domain {
                what: "time step",
                value: dt,
            });
        }
        let mut stats = StepStats::default();
        let tab = self.tableau.clone();
        let s = tab.stages();
        let mut stages: Vec<(DGField, Ledger)> = Vec::with_capacity(s + 1);
        stages.push((state.u.clone(), state.ledger));
        // T(u⁽ʲ⁾) and its outflow rate, evaluated only when a later stage uses them.
        let mut rates: Vec<Option<(DGField, Conserved)>> = Vec::with_capacity(s);
        for i in 1..=s {
            let j_new = i - 1;
            let rate = if tab.needs_transport(j_new) {
                let out = self
                    .op
                    .apply(&stages[j_new].0, &mut self.cache)
                    .map_err(|err| err.at(format!("step {} stage {i} transport", state.steps)))?;
                stats.transport_evaluations += 1;
                stats.c2p_iterations += out.c2p_iterations;
                Some((out.rhs, out.outflow))
            } else {
                None
            };
            rates.push(rate);
            let mut u = self.op.disc.zeros();
            let mut parts: Vec<(f64, Ledger)> = Vec::new();
            for (j, (&c, &ch)) in tab.c[i - 1].iter().zip(&tab.c_hat[i - 1]).enumerate() {
                if c == 0.0 {
                    continue;
                }
                u.axpy(c, &stages[j].0);
                let mut l = stages[j].1;
                if ch > 0.0 {
                    let (r, out) = rates[j].as_ref().expect("transport rate evaluated");
                    u.axpy(c * ch * dt, r);
                    l.outflow += *out * (ch * dt);
                }
                parts.push((c, l));
            }
            let refs: Vec<(f64, &Ledger)> = parts.iter().map(|(c, l)| (*c, l)).collect();
            let mut ledger = Ledger::combine(&refs);
            self.limit(&mut u, &mut stats)
                .map_err(|err| err.at(format!("step {} stage {i} explicit", state.steps)))?;
            let a = tab.a_diag[i - 1];
            if a > 0.0 {
                ledger.source += self
                    .collide(&mut u, a * dt, &mut stats)
                    .map_err(|err| err.at(format!("step {} stage {i}", state.steps)))?;
                self.limit(&mut u, &mut stats)
                    .map_err(|err| err.at(format!("step {} stage {i} implicit", state.steps)))?;
            }
            stages.push((u, ledger));
        }
        let (u, ledger) = stages.pop().expect("at least one stage");
        state.u = u;
        state.ledger = ledger;
        state.t += dt;
        state.steps += 1;
        Ok(stats)
    }

    /// Steps to `t_end` with step `dt`, shortening the last step to land exactly.
    /// `observe` runs after every step.
    pub fn run_until(
        &mut self,
        state: &mut State,
        t_end: f64,
        dt: f64,
        mut observe: impl FnMut(&State, &StepStats) -> Result<()>,
    ) -> Result<StepStats> {
        let mut total = StepStats::default();
        while state.t < t_end * (1.0 - 1e-14) {
            let h = dt.min(t_end - state.t);
            let st = self.step(state, h)?;
            total.merge(&st);
            observe(state, &st)?;
        }
        Ok(total)
    }

    /// Current ledger residual.
    pub fn ledger_residual(&self, state: &State) -> f64 {
        state.ledger.residual(&self.op.disc.total(&state.u))
    }
}
