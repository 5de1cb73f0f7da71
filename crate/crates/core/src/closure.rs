//! Maximum-entropy (Minerbo) closure for the comoving moments.
//!
//! The solver uses the algebraic fits for the Eddington factor `k` and the heat-flux
//! factor `q`; [`minerbo_exact`] inverts the Langevin function and serves as the
//! reference they are checked against. Tensors are contravariant and built with
//! mirrored assignment, so symmetry is exact.

use crate::error::{Error, Result};
use crate::kinematics::FourVector;

/// Below this ratio H/J the flux direction is treated as undefined.
pub const DEGENERATE_FLUX_RATIO: f64 = 1e-14;
const H_DOMAIN_SLACK: f64 = 1e-12;

/// Flux factor h and the closure scalars evaluated at it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureFactors {
    pub h: f64,
    pub k: f64,
    pub q: f64,
}

impl ClosureFactors {
    pub fn algebraic(h: f64) -> Self {
        Self {
            h,
            k: k_alg(h),
            q: q_alg(h),
        }
    }
}

#[inline]
pub(crate) fn k_alg(h: f64) -> f64 {
    let h2 = h * h;
    1.0 / 3.0 + (2.0 / 15.0) * h2 * (3.0 - h + 3.0 * h2)
}

/// dk/dh of the algebraic fit.
#[inline]
pub(crate) fn dk_alg(h: f64) -> f64 {
    (2.0 / 15.0) * h * (6.0 - 3.0 * h + 12.0 * h * h)
}

#[inline]
pub(crate) fn q_alg(h: f64) -> f64 {
    let p = 45.0 + h * (10.0 + h * (-12.0 + h * (-12.0 + h * (38.0 + h * (-12.0 + h * 18.0)))));
    h * p / 75.0
}

fn check_h(h: f64) -> Result<f64> {
    if !(-H_DOMAIN_SLACK..=1.0 + H_DOMAIN_SLACK).contains(&h) {
        return Err(Error::Domain {
            what: "flux factor",
            value: h,
        });
    }
    Ok(h.clamp(0.0, 1.0))
}

/// k = 1/3 + (2/15)(3h² − h³ + 3h⁴).
pub fn eddington_factor_algebraic(h: f64) -> Result<f64> {
    check_h(h).map(k_alg)
}

/// q = (h/75)(45 + 10h − 12h² − 12h³ + 38h⁴ − 12h⁵ + 18h⁶).
pub fn heat_flux_factor_algebraic(h: f64) -> Result<f64> {
    check_h(h).map(q_alg)
}

const ALPHA_SERIES: f64 = 0.05;
const ALPHA_MAX: f64 = 500.0;

/// Langevin function coth α − 1/α.
pub fn langevin(alpha: f64) -> f64 {
    if alpha < ALPHA_SERIES {
        let a2 = alpha * alpha;
        alpha * (1.0 / 3.0 - a2 * (1.0 / 45.0 - a2 * (2.0 / 945.0)))
    } else {
        1.0 / alpha.tanh() - 1.0 / alpha
    }
}

fn langevin_derivative(alpha: f64) -> f64 {
    if alpha < ALPHA_SERIES {
        let a2 = alpha * alpha;
        1.0 / 3.0 - a2 * (1.0 / 15.0 - a2 * (2.0 / 189.0))
    } else {
        let s = alpha.sinh();
        1.0 / (alpha * alpha) - 1.0 / (s * s)
    }
}

/// Solves L(α) = h on (0, 500] with a bracketed Newton iteration.
pub fn inverse_langevin(h: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, ALPHA_MAX);
    if h >= langevin(ALPHA_MAX) {
        // coth α = 1 to double precision here, so L(α) = 1 − 1/α.
        return 1.0 / (1.0 - h);
    }
    let mut alpha = (3.0 * h).min(0.5 * ALPHA_MAX);
    for _ in 0..200 {
        let f = langevin(alpha) - h;
        if f > 0.0 {
            hi = alpha;
        } else {
            lo = alpha;
        }
        if f.abs() <= 1e-15 * h.max(1e-300) || hi - lo <= 1e-14 * hi {
            break;
        }
        let step = alpha - f / langevin_derivative(alpha);
        alpha = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    alpha
}

/// Exact Minerbo closure factors from the inverse Langevin function.
pub fn minerbo_exact(h: f64) -> Result<ClosureFactors> {
    let h = check_h(h)?;
    if h >= 1.0 - 1e-10 {
        return Ok(ClosureFactors { h, k: 1.0, q: 1.0 });
    }
    if h <= 1e-6 {
        // Leading terms of the small-α expansion.
        return Ok(ClosureFactors {
            h,
            k: 1.0 / 3.0 + 0.4 * h * h,
            q: 0.6 * h,
        });
    }
    let alpha = inverse_langevin(h);
    let k = 1.0 - 2.0 * h / alpha;
    let q = if alpha < ALPHA_SERIES {
        let a2 = alpha * alpha;
        alpha * (0.2 - a2 * (1.0 / 105.0 - a2 * (4.0 / 4725.0)))
    } else {
        1.0 / alpha.tanh() - 3.0 * k / alpha
    };
    Ok(ClosureFactors { h, k, q })
}

/// Flux factor h = min(H/J, 1) and unit direction ĥ^μ of a comoving flux H^μ.
///
/// Returns a zero direction and h = 0 when H/J is below [`DEGENERATE_FLUX_RATIO`].
pub fn flux_direction(j: f64, h_up: &FourVector) -> (f64, FourVector) {
    let mag = h_up.norm2().max(0.0).sqrt();
    if !(mag > DEGENERATE_FLUX_RATIO * j) {
        return (0.0, FourVector::default());
    }
    let inv = 1.0 / mag;
    ((mag / j).min(1.0), FourVector(h_up.0.map(|c| c * inv)))
}

/// Symmetric rank-two contravariant tensor.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RankTwoTensor(pub [[f64; 4]; 4]);

/// Fully symmetric rank-three contravariant tensor.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RankThreeTensor(pub [[[f64; 4]; 4]; 4]);

const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

impl RankTwoTensor {
    fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let x = f(a, b);
                t[a][b] = x;
                t[b][a] = x;
            }
        }
        Self(t)
    }

    /// η_{μν} T^{μν}.
    pub fn trace(&self) -> f64 {
        (0..4).map(|a| ETA[a] * self.0[a][a]).sum()
    }

    /// x_μ T^{μν} for a contravariant x.
    pub fn lower_contract(&self, x: &FourVector) -> [f64; 4] {
        let xl = x.lower();
        let mut out = [0.0; 4];
        for (nu, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|mu| xl[mu] * self.0[mu][nu]).sum();
        }
        out
    }
}

impl RankThreeTensor {
    fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = [[[0.0; 4]; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                for c in b..4 {
                    let x = f(a, b, c);
                    for (i, j, k) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        t[i][j][k] = x;
                    }
                }
            }
        }
        Self(t)
    }

    /// η_{νρ} T^{μνρ}.
    pub fn trace(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (mu, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|a| ETA[a] * self.0[mu][a][a]).sum();
        }
        out
    }

    /// T^{μνρ} A_{νρ} for a covariant A.
    pub fn contract_lower_pair(&self, a: &[[f64; 4]; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (mu, o) in out.iter_mut().enumerate() {
            for nu in 0..4 {
                for rho in 0..4 {
                    *o += self.0[mu][nu][rho] * a[nu][rho];
                }
            }
        }
        out
    }
}

#[inline]
fn projector(u: &FourVector, a: usize, b: usize) -> f64 {
    let eta = if a == b { ETA[a] } else { 0.0 };
    eta + u.0[a] * u.0[b]
}

/// K^{μν} = ½[(1−k)h^{μν} + (3k−1)ĥ^μĥ^ν] J with h^{μν} = η^{μν} + u^μu^ν.
pub fn pressure_tensor(j: f64, h_up: &FourVector, u: &FourVector) -> RankTwoTensor {
    let (h, dir) = flux_direction(j, h_up);
    let k = k_alg(h);
    RankTwoTensor::from_fn(|a, b| {
        0.5 * j * ((1.0 - k) * projector(u, a, b) + (3.0 * k - 1.0) * dir.0[a] * dir.0[b])
    })
}

/// L^{μνρ} = ½[(h−q)(ĥ^μh^{νρ} + ĥ^νh^{μρ} + ĥ^ρh^{μν}) + (5q−3h)ĥ^μĥ^νĥ^ρ] J.
pub fn heat_flux_tensor(j: f64, h_up: &FourVector, u: &FourVector) -> RankThreeTensor {
    let (h, d) = flux_direction(j, h_up);
    let q = q_alg(h);
    RankThreeTensor::from_fn(|a, b, c| {
        0.5 * j
            * ((h - q)
                * (d.0[a] * projector(u, b, c) + d.0[b] * projector(u, a, c) + d.0[c] * projector(u, a, b))
                + (5.0 * q - 3.0 * h) * d.0[a] * d.0[b] * d.0[c])
    })
}

/// Q^{μνρ}/ε from its Lagrangian decomposition in J, H, K and L.
pub fn q_tensor(j: f64, h_up: &FourVector, u: &FourVector) -> RankThreeTensor {
    let k = pressure_tensor(j, h_up, u);
    let l = heat_flux_tensor(j, h_up, u);
    let (uu, hh) = (&u.0, &h_up.0);
    RankThreeTensor::from_fn(|a, b, c| {
        j * uu[a] * uu[b] * uu[c]
            + hh[a] * uu[b] * uu[c]
            + hh[b] * uu[a] * uu[c]
            + hh[c] * uu[a] * uu[b]
            + k.0[a][b] * uu[c]
            + k.0[a][c] * uu[b]
            + k.0[b][c] * uu[a]
            + l.0[a][b][c]
    })
}

/// Q^{μνρ}A_{νρ}/ε for a symmetric covariant A without forming Q.
pub fn q_contract(j: f64, h_up: &FourVector, u: &FourVector, a: &[[f64; 4]; 4]) -> [f64; 4] {
    let (h, d) = flux_direction(j, h_up);
    let (k, q) = (k_alg(h), q_alg(h));
    let lower_apply = |x: &FourVector| -> [f64; 4] {
        let mut out = [0.0; 4];
        for (nu, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|rho| a[nu][rho] * x.0[rho]).sum();
        }
        out
    };
    let dot = |x: &[f64; 4], y: &FourVector| -> f64 { (0..4).map(|i| x[i] * y.0[i]).sum() };
    let au = lower_apply(u);
    let ad = lower_apply(&d);
    let uau = dot(&au, u);
    let hau = dot(&au, h_up);
    let dau = dot(&au, &d);
    let dad = dot(&ad, &d);
    let trace_a: f64 = (0..4).map(|i| ETA[i] * a[i][i]).sum();
    let proj_a = trace_a + uau;
    let k_colon_a = 0.5 * j * ((1.0 - k) * proj_a + (3.0 * k - 1.0) * dad);

    let mut out = [0.0; 4];
    for mu in 0..4 {
        let (um, hm, dm) = (u.0[mu], h_up.0[mu], d.0[mu]);
        let k_au = 0.5 * j * ((1.0 - k) * (ETA[mu] * au[mu] + um * uau) + (3.0 * k - 1.0) * dm * dau);
        let l_a = 0.5
            * j
            * ((h - q) * (dm * proj_a + 2.0 * (ETA[mu] * ad[mu] + um * dau))
                + (5.0 * q - 3.0 * h) * dm * dad);
        out[mu] = j * um * uau + hm * uau + 2.0 * um * hau + 2.0 * k_au + um * k_colon_a + l_a;
    }
    out
}
