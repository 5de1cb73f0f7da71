//! Special-relativistic four-vector algebra on flat spacetime with signature (−,+,+,+).
//!
//! The metric is never stored: lowering or raising an index flips the sign of the
//! time component. Units have c = 1.

use crate::error::{Error, Result};

/// Fluid three-velocity together with its cached magnitude and Lorentz factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeVelocity {
    pub v: [f64; 3],
    speed: f64,
    w: f64,
}

impl ThreeVelocity {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let speed = norm3(&v);
        if !(speed < 1.0) {
            return Err(Error::InvalidVelocity { speed });
        }
        Ok(Self {
            v,
            speed,
            w: 1.0 / ((1.0 - speed) * (1.0 + speed)).sqrt(),
        })
    }

    pub fn along_x(v: f64) -> Result<Self> {
        Self::new([v, 0.0, 0.0])
    }

    pub const fn rest() -> Self {
        Self {
            v: [0.0; 3],
            speed: 0.0,
            w: 1.0,
        }
    }

    /// Magnitude √(vᵢvⁱ).
    #[inline]
    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Lorentz factor W.
    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    /// vⁱaᵢ for a spatial covector a.
    #[inline]
    pub fn dot(&self, a: &[f64; 3]) -> f64 {
        self.v[0] * a[0] + self.v[1] * a[1] + self.v[2] * a[2]
    }

    /// Fluid four-velocity u^μ = W(1, vⁱ).
    pub fn four_velocity(&self) -> FourVector {
        FourVector([self.w, self.w * self.v[0], self.w * self.v[1], self.w * self.v[2]])
    }
}

/// W = (1 − vᵢvⁱ)^(−1/2).
pub fn lorentz_factor(v: [f64; 3]) -> Result<f64> {
    ThreeVelocity::new(v).map(|tv| tv.w())
}

#[inline]
pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Contravariant four-vector (a⁰, a¹, a², a³).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const EULERIAN_NORMAL: FourVector = FourVector([1.0, 0.0, 0.0, 0.0]);

    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self([t, x, y, z])
    }

    pub fn spatial(v: [f64; 3]) -> Self {
        Self([0.0, v[0], v[1], v[2]])
    }

    /// Covariant components a_μ.
    pub fn lower(&self) -> [f64; 4] {
        [-self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    /// η_{μν} a^μ b^ν.
    pub fn dot(&self, other: &FourVector) -> f64 {
        -self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2] + self.0[3] * other.0[3]
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self)
    }

    pub fn space(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }
}

/// Lorentz boost from the comoving orthonormal frame to the Eulerian frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostMatrix {
    forward: [[f64; 4]; 4],
    inverse: [[f64; 4]; 4],
}

impl BoostMatrix {
    pub fn new(v: &ThreeVelocity) -> Self {
        Self {
            forward: boost_matrix(v.v, v.speed(), v.w()),
            inverse: boost_matrix([-v.v[0], -v.v[1], -v.v[2]], v.speed(), v.w()),
        }
    }

    /// Row μ, column μ̂ of the forward transformation.
    pub fn component(&self, mu: usize, nu: usize) -> f64 {
        self.forward[mu][nu]
    }

    pub fn apply(&self, a: &FourVector) -> FourVector {
        FourVector(matvec(&self.forward, &a.0))
    }

    pub fn apply_inverse(&self, a: &FourVector) -> FourVector {
        FourVector(matvec(&self.inverse, &a.0))
    }
}

fn boost_matrix(v: [f64; 3], speed: f64, w: f64) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    m[0][0] = w;
    for i in 0..3 {
        m[0][i + 1] = w * v[i];
        m[i + 1][0] = w * v[i];
        m[i + 1][i + 1] = 1.0;
    }
    if speed > 0.0 {
        let c = (w - 1.0) / (speed * speed);
        for i in 0..3 {
            for j in 0..3 {
                m[i + 1][j + 1] += c * v[i] * v[j];
            }
        }
    }
    m
}

fn matvec(m: &[[f64; 4]; 4], a: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(a).map(|(r, x)| r * x).sum();
    }
    out
}

/// Unit spatial direction ℓ^μ̂ in the comoving frame; the polar axis is x¹.
pub fn comoving_unit_direction(theta: f64, phi: f64) -> FourVector {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    FourVector([0.0, ct, st * cp, st * sp])
}

/// ℓ^μ = L^μ_μ̂ ℓ^μ̂.
pub fn boost_direction(l_hat: &FourVector, v: &ThreeVelocity) -> FourVector {
    BoostMatrix::new(v).apply(l_hat)
}

/// Eulerian particle energy ratio E/ε and Eulerian unit direction L^μ (with L⁰ = 0).
pub fn eulerian_direction(l: &FourVector, v: &ThreeVelocity) -> (f64, FourVector) {
    let vl = v.dot(&l.space());
    let e_over_eps = v.w() + vl;
    let mut out = [0.0; 4];
    for i in 0..3 {
        out[i + 1] = (l.0[i + 1] + v.w() * v.v[i]) / e_over_eps;
    }
    // ℓ⁰ = vᵢℓⁱ, so the time component cancels exactly.
    out[0] = (l.0[0] - vl) / e_over_eps;
    (e_over_eps, FourVector(out))
}

/// Sharp bounds W(1−v) ≤ E/ε ≤ √((1+v)/(1−v)).
pub fn e_over_eps_bounds(v: &ThreeVelocity) -> (f64, f64) {
    let s = v.speed();
    (v.w() * (1.0 - s), ((1.0 + s) / (1.0 - s)).sqrt())
}
