//! Energy-integrated diagnostics and error measures evaluated on nodal data.

use std::f64::consts::PI;

use crate::dg::{DGField, Discretization, FluidField};
use crate::error::Result;
use crate::moments::{number_density, Primitive};

/// ε²-weighted energy integrals at one spatial node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GreyPoint {
    pub x: [f64; 2],
    /// Spatial quadrature weight of the node, Δx·w.
    pub weight: f64,
    pub j: f64,
    pub e: f64,
    /// ∫J/ε ε²dε, the comoving number density.
    pub d: f64,
    /// Eulerian number density.
    pub n: f64,
    pub f: [f64; 3],
    pub h: [f64; 3],
    /// ∫J ε⁴dε.
    pub j_eps2: f64,
}

impl GreyPoint {
    /// √(∫Jε⁴dε / ∫Jε²dε).
    pub fn rms_energy(&self) -> f64 {
        (self.j_eps2 / self.j).sqrt()
    }
}

/// Grey moments at every spatial node, indexed `ks·Nx^d + s`.
///
/// `prims` holds the recovered comoving moments at every phase-space node.
pub fn grey_moments(
    disc: &Discretization,
    fluid: &FluidField,
    u: &DGField,
    prims: &[Primitive],
) -> Result<Vec<GreyPoint>> {
    let mesh = &disc.mesh;
    let nsn = disc.spatial_nodes();
    let nq = disc.n_space_nodes();
    let ne = disc.n_energy_nodes();
    let npe = disc.nodes_per_element();
    let mut out = vec![GreyPoint::default(); mesh.n_spatial() * nsn];
    for ks in 0..mesh.n_spatial() {
        for s in 0..nsn {
            let q = [s % nq, s / nq];
            let g = &mut out[ks * nsn + s];
            g.x = disc.x_node(ks, q);
            g.weight = disc.spatial_weight(q);
        }
    }
    for e in 0..mesh.n_elements() {
        let (ks, ie) = mesh.split(e);
        for a in 0..npe {
            let (p, s) = (a % ne, a / ne);
            let eps = disc.energy_node(ie, p);
            let w = disc.energy_weight(ie, p);
            let m = &prims[e * npe + a];
            let uu = &u.data[e * npe + a];
            let v = &fluid.velocity[ks * nsn + s];
            let (n, _) = number_density(m, v, eps)?;
            let g = &mut out[ks * nsn + s];
            g.j += w * m.j;
            g.e += w * uu.e;
            g.d += w * m.j / eps;
            g.n += w * n;
            g.j_eps2 += w * eps * eps * m.j;
            for i in 0..3 {
                g.f[i] += w * uu.f[i];
                g.h[i] += w * m.h[i];
            }
        }
    }
    Ok(out)
}

/// (ε, plain quadrature weight, J) at every energy node of spatial node `(ks, s)`.
pub fn spectrum(disc: &Discretization, prims: &[Primitive], ks: usize, s: usize) -> Vec<(f64, f64, f64)> {
    let mesh = &disc.mesh;
    let ne = disc.n_energy_nodes();
    let npe = disc.nodes_per_element();
    let mut out = Vec::with_capacity(mesh.n_energy() * ne);
    for ie in 0..mesh.n_energy() {
        let (lo, hi) = mesh.energy_bounds(ie);
        let e = mesh.element(ks, ie);
        for p in 0..ne {
            out.push((
                disc.energy_node(ie, p),
                disc.energy.weights[p] * (hi - lo),
                prims[e * npe + p + ne * s].j,
            ));
        }
    }
    out
}

/// Spatial node closest to `x`, as `(ks, s)`.
pub fn nearest_spatial_node(disc: &Discretization, x: [f64; 2]) -> (usize, usize) {
    let nsn = disc.spatial_nodes();
    let nq = disc.n_space_nodes();
    let mut best = (0, 0, f64::INFINITY);
    for ks in 0..disc.mesh.n_spatial() {
        for s in 0..nsn {
            let y = disc.x_node(ks, [s % nq, s / nq]);
            let d = (0..disc.dim()).map(|i| (y[i] - x[i]).powi(2)).sum::<f64>();
            if d < best.2 {
                best = (ks, s, d);
            }
        }
    }
    (best.0, best.1)
}

/// √(Σw(a−b)²) / √(Σw b²).
pub fn relative_l2(values: &[f64], reference: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((a, b), w) in values.iter().zip(reference).zip(weights) {
        num += w * (a - b) * (a - b);
        den += w * b * b;
    }
    (num / den).sqrt()
}

/// Relative L² errors on `x < split` and `x ≥ split`; samples are `(x, weight, value)`.
pub fn error_norms(samples: &[(f64, f64, f64)], analytic: impl Fn(f64) -> f64, split: f64) -> (f64, f64) {
    let mut side = [[0.0; 2]; 2];
    for &(x, w, val) in samples {
        let a = analytic(x);
        let k = usize::from(x >= split);
        side[k][0] += w * (val - a) * (val - a);
        side[k][1] += w * a * a;
    }
    ((side[0][0] / side[0][1]).sqrt(), (side[1][0] / side[1][1]).sqrt())
}

/// Isotropic luminosity 2π|x − x_S||F| of a grey flux seen at `x`.
pub fn luminosity(x: [f64; 2], source: [f64; 2], f: [f64; 3]) -> f64 {
    let r = ((x[0] - source[0]).powi(2) + (x[1] - source[1]).powi(2)).sqrt();
    2.0 * PI * r * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()
}

/// Least-squares slope of log(error) against log(1/n).
pub fn convergence_slope(cells: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = cells.iter().map(|&n| -(n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{uniform_edges, PhaseSpaceMesh};
    use crate::kinematics::ThreeVelocity;
    use crate::moments::conserved_from_primitive;
    use approx::assert_relative_eq;

    fn setup(eps_max: f64, ke: usize, v: f64) -> (Discretization, FluidField) {
        let mesh =
            PhaseSpaceMesh::new(1, [2, 1], [0.0; 2], [1.0; 2], uniform_edges(0.0, eps_max, 1)).unwrap();
        let disc = Discretization::new(mesh, ke, 1);
        let fluid = FluidField::new(&disc, |_| [v, 0.0, 0.0], None, [true, false]).unwrap();
        (disc, fluid)
    }

    fn flat(disc: &Discretization, fluid: &FluidField, j: f64) -> (DGField, Vec<Primitive>) {
        let m = Primitive::new(j, [0.0; 3]);
        let v = fluid.velocity[0];
        let u = disc.project(|_, _| conserved_from_primitive(&m, &v).unwrap());
        (u, vec![m; disc.n_nodes()])
    }

    #[test]
    fn flat_spectrum_integrals() {
        let (disc, fluid) = setup(2.0, 0, 0.0);
        let (u, prims) = flat(&disc, &fluid, 3.0);
        let g = grey_moments(&disc, &fluid, &u, &prims).unwrap();
        assert_eq!(g.len(), 4);
        for p in &g {
            assert_relative_eq!(p.j, 3.0 * disc.mesh.energy_volume(0), max_relative = 1e-14);
            assert_relative_eq!(p.e, p.j, max_relative = 1e-14);
        }
    }

    #[test]
    fn rms_energy_of_flat_spectrum() {
        // ∫ε⁴/∫ε² over [0, ε_m] = 3ε_m²/5.
        let eps_m = 7.0;
        let (disc, fluid) = setup(eps_m, 2, 0.0);
        let (u, prims) = flat(&disc, &fluid, 0.4);
        let g = grey_moments(&disc, &fluid, &u, &prims).unwrap();
        assert_relative_eq!(g[0].rms_energy(), eps_m * (0.6f64).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn number_densities_coincide_at_rest() {
        let (disc, fluid) = setup(3.0, 1, 0.0);
        let (u, prims) = flat(&disc, &fluid, 1.5);
        for p in grey_moments(&disc, &fluid, &u, &prims).unwrap() {
            assert_relative_eq!(p.d, p.n, max_relative = 1e-14);
        }
        let (disc, fluid) = setup(3.0, 1, 0.4);
        let (u, prims) = flat(&disc, &fluid, 1.5);
        let g = grey_moments(&disc, &fluid, &u, &prims).unwrap();
        // Isotropic comoving radiation: N = W·D.
        let w = ThreeVelocity::along_x(0.4).unwrap().w();
        assert_relative_eq!(g[0].n, w * g[0].d, max_relative = 1e-14);
    }

    #[test]
    fn error_norm_examples() {
        let samples: Vec<(f64, f64, f64)> = (0..40)
            .map(|i| {
                let x = (i as f64 + 0.5) / 20.0;
                (x, 0.05, x.sin() + 2.0)
            })
            .collect();
        let exact = |x: f64| x.sin() + 2.0;
        assert_eq!(error_norms(&samples, exact, 1.0), (0.0, 0.0));
        let doubled: Vec<_> = samples.iter().map(|&(x, w, v)| (x, w, 2.0 * v)).collect();
        let (lo, hi) = error_norms(&doubled, exact, 1.0);
        assert_relative_eq!(lo, 1.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn luminosity_examples() {
        assert_eq!(luminosity([4.0, 1.0], [3.0, 0.0], [0.0; 3]), 0.0);
        assert_relative_eq!(
            luminosity([3.0, 1.0], [3.0, 0.0], [0.6, 0.8, 0.0]),
            2.0 * PI,
            max_relative = 1e-15
        );
    }

    #[test]
    fn slope_of_exact_power_law() {
        let cells = [16, 32, 64, 128];
        let errs: Vec<f64> = cells.iter().map(|&n| 5.0 * (n as f64).powf(-2.5)).collect();
        assert_relative_eq!(convergence_slope(&cells, &errs), 2.5, max_relative = 1e-12);
    }

    #[test]
    fn nearest_node_and_spectrum_layout() {
        let mesh = PhaseSpaceMesh::new(1, [4, 1], [0.0; 2], [4.0, 1.0], uniform_edges(0.0, 2.0, 2)).unwrap();
        let disc = Discretization::new(mesh, 1, 1);
        let (ks, s) = nearest_spatial_node(&disc, [2.9, 0.0]);
        let x = disc.x_node(ks, [s, 0]);
        assert_eq!(ks, 2);
        assert!((x[0] - 2.9).abs() < 0.5);
        let prims: Vec<Primitive> = (0..disc.n_nodes())
            .map(|i| Primitive::new(i as f64, [0.0; 3]))
            .collect();
        let sp = spectrum(&disc, &prims, ks, s);
        assert_eq!(sp.len(), 4);
        let total: f64 = sp.iter().map(|t| t.1).sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
        assert!(sp.windows(2).all(|w| w[1].0 > w[0].0));
    }
}
