//! Steady fluid background on the DG mesh: nodal velocities, the weakly projected
//! four-velocity gradient, face velocities, the energy-advection speed bound and
//! nodal opacities.

use super::field::Discretization;
use crate::error::Result;
use crate::kinematics::ThreeVelocity;
use crate::solvers::FluidState;

/// Spatial derivatives of W and Wvⱼ at a point; `dwv[i][j] = ∂ᵢ(Wvⱼ)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct VelocityGradient {
    pub dw: [f64; 3],
    pub dwv: [[f64; 3]; 3],
}

impl VelocityGradient {
    pub fn is_zero(&self) -> bool {
        self.dw.iter().chain(self.dwv.iter().flatten()).all(|&x| x == 0.0)
    }

    /// Symmetrized covariant gradient A_{νρ} = ½(∂_νu_ρ + ∂_ρu_ν) with ∂_t u = 0,
    /// u_0 = −W and u_j = Wvⱼ.
    pub fn strain(&self) -> [[f64; 4]; 4] {
        let mut a = [[0.0; 4]; 4];
        for i in 0..3 {
            a[0][i + 1] = -0.5 * self.dw[i];
            a[i + 1][0] = a[0][i + 1];
            for j in 0..3 {
                a[i + 1][j + 1] = 0.5 * (self.dwv[i][j] + self.dwv[j][i]);
            }
        }
        a
    }
}

/// Eigenvalues of a symmetric 3×3 matrix (trigonometric closed form).
pub fn symmetric_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let tr = m[0][0] + m[1][1] + m[2][2];
    if p1 == 0.0 {
        return [m[0][0], m[1][1], m[2][2]];
    }
    let q = tr / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [l1, 3.0 * q - l1 - l3, l3]
}

/// a_max^ε = ((1+v)/(1−v))(|A| + 2√(BᵢBⁱ) + ρ(C)) for a steady background (A = 0).
pub fn a_eps_max(v: &ThreeVelocity, g: &VelocityGradient) -> f64 {
    if g.is_zero() {
        return 0.0;
    }
    let b = 0.5 * (g.dw[0].powi(2) + g.dw[1].powi(2) + g.dw[2].powi(2)).sqrt();
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = 0.5 * (g.dwv[i][j] + g.dwv[j][i]);
        }
    }
    let rho = symmetric_eigenvalues(&c)
        .iter()
        .fold(0.0f64, |s, l| s.max(l.abs()));
    let s = v.speed();
    (1.0 + s) / (1.0 - s) * (2.0 * b + rho)
}

/// Per-node opacities (χ, σ, J_eq).
pub type Opacity = [f64; 3];

/// Background fields sampled on a [`Discretization`].
#[derive(Clone, Debug)]
pub struct FluidField {
    /// Velocity at spatial node `s` of spatial cell `ks`: index `ks·Nx^d + s`.
    pub velocity: Vec<ThreeVelocity>,
    pub gradient: Vec<VelocityGradient>,
    /// a^ε per spatial cell: max of a_max^ε over its nodes.
    pub a_eps: Vec<f64>,
    /// Face velocities per (spatial cell, axis, side, face point).
    face_velocity: Vec<ThreeVelocity>,
    face_points: usize,
    /// Per phase-space node; empty when the background is transparent.
    opacity: Vec<Opacity>,
    periodic: [bool; 2],
}

impl FluidField {
    /// Samples `velocity(x)` at the spatial nodes and `opacity(ε, x)` at every node.
    pub fn new(
        disc: &Discretization,
        velocity: impl Fn([f64; 2]) -> [f64; 3],
        opacity: Option<&dyn Fn(f64, [f64; 2]) -> Opacity>,
        periodic: [bool; 2],
    ) -> Result<Self> {
        let mesh = &disc.mesh;
        let nsn = disc.spatial_nodes();
        let nq = disc.n_space_nodes();
        let dim = disc.dim();
        let mut vel = Vec::with_capacity(mesh.n_spatial() * nsn);
        for ks in 0..mesh.n_spatial() {
            for s in 0..nsn {
                let q = [s % nq, s / nq];
                vel.push(ThreeVelocity::new(velocity(disc.x_node(ks, q)))?);
            }
        }
        let face_points = if dim == 2 { nq } else { 1 };
        let mut field = Self {
            gradient: vec![VelocityGradient::default(); vel.len()],
            a_eps: vec![0.0; mesh.n_spatial()],
            face_velocity: vec![ThreeVelocity::rest(); mesh.n_spatial() * 4 * face_points],
            face_points,
            velocity: vel,
            opacity: Vec::new(),
            periodic,
        };
        let lower = |v: &ThreeVelocity| -> [f64; 4] {
            let w = v.w();
            [-w, w * v.v[0], w * v.v[1], w * v.v[2]]
        };
        for ks in 0..mesh.n_spatial() {
            for axis in 0..dim {
                for t in 0..face_points {
                    let line: Vec<usize> = (0..nq).map(|j| line_node(nq, axis, j, t)).collect();
                    let u: Vec<[f64; 4]> = line
                        .iter()
                        .map(|&s| lower(&field.velocity[ks * nsn + s]))
                        .collect();
                    let own = [trace(&u, &disc.space.left), trace(&u, &disc.space.right)];
                    let mut hat = [[0.0; 4]; 2];
                    for side in 0..2 {
                        let other = match field.neighbor(disc, ks, axis, side) {
                            Some(nb) => {
                                let un: Vec<[f64; 4]> = line
                                    .iter()
                                    .map(|&s| lower(&field.velocity[nb * nsn + s]))
                                    .collect();
                                let basis = if side == 0 {
                                    &disc.space.right
                                } else {
                                    &disc.space.left
                                };
                                trace(&un, basis)
                            }
                            None => own[side],
                        };
                        for mu in 0..4 {
                            hat[side][mu] = 0.5 * (own[side][mu] + other[mu]);
                        }
                        let w = -hat[side][0];
                        let v = [hat[side][1] / w, hat[side][2] / w, hat[side][3] / w];
                        let idx = field.face_index(ks, axis, side, t);
                        field.face_velocity[idx] = ThreeVelocity::new(v)?;
                    }
                    let dx = mesh.dx(axis);
                    // Round-off gradients of a uniform flow are flushed to exact zeros.
                    let floor =
                        64.0 * f64::EPSILON / dx * u.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                    for (j, &s) in line.iter().enumerate() {
                        let mut d = [0.0; 4];
                        for mu in 0..4 {
                            let vol: f64 = (0..nq)
                                .map(|r| disc.space.weights[r] * u[r][mu] * disc.space.dmat[r][j])
                                .sum();
                            d[mu] =
                                (hat[1][mu] * disc.space.right[j] - hat[0][mu] * disc.space.left[j] - vol)
                                    / (dx * disc.space.weights[j]);
                            if d[mu].abs() <= floor {
                                d[mu] = 0.0;
                            }
                        }
                        let g = &mut field.gradient[ks * nsn + s];
                        g.dw[axis] = -d[0];
                        g.dwv[axis] = [d[1], d[2], d[3]];
                    }
                }
            }
            for s in 0..nsn {
                let i = ks * nsn + s;
                field.a_eps[ks] = field.a_eps[ks].max(a_eps_max(&field.velocity[i], &field.gradient[i]));
            }
        }
        if let Some(op) = opacity {
            let npe = disc.nodes_per_element();
            field.opacity = Vec::with_capacity(disc.n_nodes());
            for e in 0..mesh.n_elements() {
                let (ks, ie) = mesh.split(e);
                for a in 0..npe {
                    let (p, q) = disc.unpack(a);
                    field
                        .opacity
                        .push(op(disc.energy_node(ie, p), disc.x_node(ks, q)));
                }
            }
        }
        Ok(field)
    }

    /// Neighboring spatial cell across `side` (0 = low, 1 = high) of `axis`.
    pub fn neighbor(&self, disc: &Discretization, ks: usize, axis: usize, side: usize) -> Option<usize> {
        let cells = disc.mesh.cells();
        let mut c = disc.mesh.spatial_coords(ks);
        let n = cells[axis];
        if side == 0 {
            if c[axis] == 0 {
                if !self.periodic[axis] {
                    return None;
                }
                c[axis] = n - 1;
            } else {
                c[axis] -= 1;
            }
        } else if c[axis] + 1 == n {
            if !self.periodic[axis] {
                return None;
            }
            c[axis] = 0;
        } else {
            c[axis] += 1;
        }
        Some(disc.mesh.spatial_index(c[0], c[1]))
    }

    pub fn periodic(&self) -> [bool; 2] {
        self.periodic
    }

    #[inline]
    fn face_index(&self, ks: usize, axis: usize, side: usize, t: usize) -> usize {
        ((ks * 2 + axis) * 2 + side) * self.face_points + t
    }

    /// Central-average velocity on a face of spatial cell `ks`; `t` indexes the
    /// transverse node.
    #[inline]
    pub fn face_velocity(&self, ks: usize, axis: usize, side: usize, t: usize) -> &ThreeVelocity {
        &self.face_velocity[self.face_index(ks, axis, side, t)]
    }

    pub fn is_transparent(&self) -> bool {
        self.opacity.is_empty()
    }

    /// Fluid state at global node `e·npe + a`.
    #[inline]
    pub fn state(&self, disc: &Discretization, e: usize, a: usize) -> FluidState {
        let (ks, _) = disc.mesh.split(e);
        let (_, q) = disc.unpack(a);
        let v = self.velocity[ks * disc.spatial_nodes() + disc.spatial_node(q)];
        match self.opacity.get(e * disc.nodes_per_element() + a) {
            Some(&[chi, sigma, j_eq]) => FluidState { v, chi, sigma, j_eq },
            None => FluidState::streaming(v),
        }
    }

    /// Maximum fluid speed over the nodes.
    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().fold(0.0, |s, v| s.max(v.speed()))
    }
}

/// Spatial node index of position `j` along `axis` on transverse line `t`.
#[inline]
pub(crate) fn line_node(nq: usize, axis: usize, j: usize, t: usize) -> usize {
    if axis == 0 {
        j + nq * t
    } else {
        t + nq * j
    }
}

fn trace(u: &[[f64; 4]], basis: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (ur, b) in u.iter().zip(basis) {
        for mu in 0..4 {
            out[mu] += b * ur[mu];
        }
    }
    out
}
