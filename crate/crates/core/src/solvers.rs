//! Nodal nonlinear solvers: hat → primitive recovery (damped Picard and Newton), the
//! implicit backward-Euler collision solve, and the fixed-point contraction bound.

use crate::closure::dk_alg;
use crate::error::{Error, Result};
use crate::kinematics::ThreeVelocity;
use crate::moments::{
    comoving, conserved_from_hat, hat_from_primitive_with, Comoving, Conserved, Hat, Primitive,
};

/// Step-size rule of the Picard recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StepMode {
    /// λ/W with λ = 1/(1+v); every iterate stays realizable.
    #[default]
    Realizable,
    /// λ = 1/(1+v) without the 1/W damping.
    Aggressive,
}

/// How the residual tolerance is scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ToleranceMode {
    /// ‖F‖ ≤ tol.
    #[default]
    Absolute,
    /// ‖F‖ ≤ tol · Ê, independent of the radiation energy scale.
    Relative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol_c2p: f64,
    pub tol_coll: f64,
    pub max_iters: usize,
    pub step_mode: StepMode,
    pub tolerance: ToleranceMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_c2p: 1e-8,
            tol_coll: 1e-8,
            max_iters: 10_000,
            step_mode: StepMode::Realizable,
            tolerance: ToleranceMode::Absolute,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_c2p > 0.0) || !(self.tol_coll > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    fn threshold(&self, tol: f64, scale: f64) -> f64 {
        match self.tolerance {
            ToleranceMode::Absolute => tol,
            ToleranceMode::Relative => tol * scale,
        }
    }
}

/// Outcome of a converged solve. `iterations` counts residual evaluations, so an exact
/// initial guess reports one.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub nonrealizable_iterates: usize,
}

/// Fluid velocity and opacities at a phase-space node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidState {
    pub v: ThreeVelocity,
    /// Absorption opacity χ.
    pub chi: f64,
    /// Scattering opacity σ.
    pub sigma: f64,
    /// Equilibrium comoving energy density.
    pub j_eq: f64,
}

impl FluidState {
    pub fn streaming(v: ThreeVelocity) -> Self {
        Self {
            v,
            chi: 0.0,
            sigma: 0.0,
            j_eq: 0.0,
        }
    }

    /// Total opacity κ = χ + σ.
    pub fn kappa(&self) -> f64 {
        self.chi + self.sigma
    }

    /// Ĉ(M) = (χ(J_eq − J), −κHⱼ).
    pub fn hat_source(&self, m: &Primitive) -> Hat {
        let kappa = self.kappa();
        Hat {
            e: self.chi * (self.j_eq - m.j),
            f: m.h.map(|x| -kappa * x),
        }
    }
}

fn require_realizable_hat(uh: &Hat, v: &ThreeVelocity) -> Result<()> {
    if uh.is_realizable(v) {
        Ok(())
    } else {
        Err(Error::NonRealizable {
            what: "hat moments",
            gamma: uh.gamma(v),
            scale: uh.e,
        })
    }
}

#[inline]
fn residual(m: &Primitive, target: &Hat, v: &ThreeVelocity, c: &Comoving) -> Hat {
    hat_from_primitive_with(m, v, c) - *target
}

#[inline]
fn realizable(m: &Primitive, v: &ThreeVelocity) -> bool {
    m.is_realizable(v)
}

/// λ = 1/(1+v).
#[inline]
pub fn step_parameter(v: &ThreeVelocity) -> f64 {
    1.0 / (1.0 + v.speed())
}

/// Recovers M from realizable Û by Picard iteration starting at Û/W.
pub fn c2p_picard(uh: &Hat, v: &ThreeVelocity, cfg: &SolverConfig) -> Result<(Primitive, SolveReport)> {
    let guess = Primitive::new(uh.e / v.w(), uh.f.map(|x| x / v.w()));
    c2p_picard_from(uh, v, guess, cfg)
}

/// Picard recovery from a caller-supplied realizable guess.
pub fn c2p_picard_from(
    uh: &Hat,
    v: &ThreeVelocity,
    guess: Primitive,
    cfg: &SolverConfig,
) -> Result<(Primitive, SolveReport)> {
    require_realizable_hat(uh, v)?;
    let lambda = step_parameter(v);
    let step = match cfg.step_mode {
        StepMode::Realizable => lambda / v.w(),
        StepMode::Aggressive => lambda,
    };
    let tol = cfg.threshold(cfg.tol_c2p, uh.e);
    let mut m = guess;
    let mut report = SolveReport::default();
    loop {
        report.iterations += 1;
        let c = comoving(&m, v);
        let f = residual(&m, uh, v, &c);
        report.residual = f.norm();
        if report.residual <= tol {
            return Ok((m, report));
        }
        if report.iterations >= cfg.max_iters || !report.residual.is_finite() {
            return Err(Error::NonConvergence {
                solver: "c2p picard",
                iterations: report.iterations,
                residual: report.residual,
            });
        }
        m = Primitive::from_array((Hat::from_array(m.to_array()) - f * step).to_array());
        if !realizable(&m, v) {
            report.nonrealizable_iterates += 1;
        }
    }
}

/// Analytic Jacobian ∂F_Û/∂M, rows (Ê, F̂ⱼ) and columns (J, Hₖ).
pub fn c2p_jacobian(m: &Primitive, v: &ThreeVelocity) -> [[f64; 4]; 4] {
    let c = comoving(m, v);
    jacobian_with(v, &c)
}

fn jacobian_with(v: &ThreeVelocity, c: &Comoving) -> [[f64; 4]; 4] {
    let w = v.w();
    let w2 = w * w;
    let mut jac = [[0.0; 4]; 4];
    jac[0][0] = w;
    jac[0][1..4].copy_from_slice(&v.v);
    let degenerate = c.h == 0.0;
    let (k, s, d) = (c.k, c.dir0, c.dir);
    let kp = if degenerate { 0.0 } else { dk_alg(c.h) };
    let hk = kp * c.h;
    let alpha = [d[0] - s * v.v[0], d[1] - s * v.v[1], d[2] - s * v.v[2]];
    let aniso = if degenerate {
        0.0
    } else {
        0.5 * (3.0 * k - 1.0) / c.h
    };
    for j in 0..3 {
        let row = &mut jac[j + 1];
        row[0] = 0.5 * (w2 * v.v[j] * (1.0 - k + hk) + s * d[j] * (3.0 * k - 1.0 - 3.0 * hk));
        let radial = 0.5 * kp * (3.0 * s * d[j] - w2 * v.v[j]);
        for kk in 0..3 {
            let delta = if j == kk { 1.0 } else { 0.0 };
            row[kk + 1] = w * delta
                + radial * alpha[kk]
                + aniso * (d[j] * v.v[kk] + s * delta - 2.0 * s * d[j] * alpha[kk]);
        }
    }
    jac
}

/// Solves A x = b by Gaussian elimination with partial pivoting; `None` when singular.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-14 * scale) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for cc in col..4 {
                a[r][cc] -= f * a[col][cc];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|cc| a[r][cc] * x[cc]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Recovers M from realizable Û with full Newton steps starting at Û/W.
pub fn c2p_newton(uh: &Hat, v: &ThreeVelocity, cfg: &SolverConfig) -> Result<(Primitive, SolveReport)> {
    require_realizable_hat(uh, v)?;
    let picard_step = step_parameter(v) / v.w();
    let tol = cfg.threshold(cfg.tol_c2p, uh.e);
    let mut m = Primitive::new(uh.e / v.w(), uh.f.map(|x| x / v.w()));
    let mut report = SolveReport::default();
    loop {
        report.iterations += 1;
        let c = comoving(&m, v);
        let f = residual(&m, uh, v, &c);
        report.residual = f.norm();
        if report.residual <= tol {
            return Ok((m, report));
        }
        if report.iterations >= cfg.max_iters || !report.residual.is_finite() {
            return Err(Error::NonConvergence {
                solver: "c2p newton",
                iterations: report.iterations,
                residual: report.residual,
            });
        }
        let jac = jacobian_with(v, &c);
        let next = solve4(jac, (-f).to_array())
            .map(|dx| m + Primitive::from_array(dx))
            .filter(|n| n.j > 0.0);
        m = match next {
            Some(n) => n,
            None => m - Primitive::from_array(f.to_array()) * picard_step,
        };
        if !realizable(&m, v) {
            report.nonrealizable_iterates += 1;
        }
    }
}

/// Solves Û(M) = Û* + ΔτĈ(M) by damped Richardson iteration starting at Û*.
pub fn collision_solve(
    uh_star: &Hat,
    dtau: f64,
    fluid: &FluidState,
    cfg: &SolverConfig,
) -> Result<(Primitive, SolveReport)> {
    collision_solve_from(
        uh_star,
        dtau,
        fluid,
        Primitive::from_array(uh_star.to_array()),
        cfg,
    )
}

/// Collision solve from a caller-supplied realizable guess.
pub fn collision_solve_from(
    uh_star: &Hat,
    dtau: f64,
    fluid: &FluidState,
    guess: Primitive,
    cfg: &SolverConfig,
) -> Result<(Primitive, SolveReport)> {
    if !(dtau >= 0.0) {
        return Err(Error::Domain {
            what: "implicit step",
            value: dtau,
        });
    }
    if !(fluid.chi >= 0.0) || !(fluid.sigma >= 0.0) {
        return Err(Error::Domain {
            what: "opacity",
            value: fluid.chi.min(fluid.sigma),
        });
    }
    let v = &fluid.v;
    require_realizable_hat(uh_star, v)?;
    let lambda = step_parameter(v);
    let mu_chi = lambda / (v.w() + lambda * dtau * fluid.chi);
    let mu_kappa = lambda / (v.w() + lambda * dtau * fluid.kappa());
    let tol = cfg.threshold(cfg.tol_coll, uh_star.e + dtau * fluid.chi * fluid.j_eq.abs());
    let mut m = guess;
    let mut report = SolveReport::default();
    loop {
        report.iterations += 1;
        let c = comoving(&m, v);
        let g = hat_from_primitive_with(&m, v, &c) - *uh_star - fluid.hat_source(&m) * dtau;
        report.residual = g.norm();
        if report.residual <= tol {
            return Ok((m, report));
        }
        if report.iterations >= cfg.max_iters || !report.residual.is_finite() {
            return Err(Error::NonConvergence {
                solver: "collision",
                iterations: report.iterations,
                residual: report.residual,
            });
        }
        m = Primitive {
            j: m.j - mu_chi * g.e,
            h: [
                m.h[0] - mu_kappa * g.f[0],
                m.h[1] - mu_kappa * g.f[1],
                m.h[2] - mu_kappa * g.f[2],
            ],
        };
        if !realizable(&m, v) {
            report.nonrealizable_iterates += 1;
        }
    }
}

/// Implicit update U = U* + ΔτA(v)Ĉ(M) in conserved variables; also returns M.
pub fn collision_update(
    u_star: &Conserved,
    dtau: f64,
    fluid: &FluidState,
    guess: Option<Primitive>,
    cfg: &SolverConfig,
) -> Result<(Conserved, Primitive, SolveReport)> {
    let v = &fluid.v;
    let uh = crate::moments::hat_from_conserved(u_star, v);
    let (m, report) = match guess {
        Some(g) => collision_solve_from(&uh, dtau, fluid, g, cfg)?,
        None => collision_solve(&uh, dtau, fluid, cfg)?,
    };
    let source = conserved_from_hat(&fluid.hat_source(&m), v);
    Ok((*u_star + source * dtau, m, report))
}

/// L̃ = v√(14W⁶ + √14·W⁵ + 1) with W; the recovery map is a contraction when L̃ < W.
pub fn contraction_constant(v: f64) -> Result<(f64, f64, bool)> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::Domain {
            what: "speed",
            value: v,
        });
    }
    let w = 1.0 / ((1.0 - v) * (1.0 + v)).sqrt();
    let l = v * (14.0 * w.powi(6) + 14f64.sqrt() * w.powi(5) + 1.0).sqrt();
    Ok((l, w, l < w))
}

/// Largest speed for which the contraction bound holds, by bisection to `tol`.
pub fn critical_contraction_speed(tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.999);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match contraction_constant(mid) {
            Ok((_, _, true)) => lo = mid,
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}
