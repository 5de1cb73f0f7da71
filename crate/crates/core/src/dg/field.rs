use super::mesh::PhaseSpaceMesh;
use super::quadrature::{energy_lobatto_points, gauss_legendre, space_lobatto_points, NodalBasis};
use crate::moments::Conserved;

/// Mesh plus the nodal bases in energy and space, and the element-local mass weights.
///
/// Within an element, node `a = p + Nε·(q₁ + Nx·q₂)` sits at energy node `p` and
/// spatial nodes `(q₁, q₂)`. The mass of node `a` is ω_p·Πᵢ(wᵢ Δxᵢ) where
/// ω_p = ∫ℓ_p ε² dε is exact, so cell averages carry the ε² weight exactly.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: PhaseSpaceMesh,
    pub energy: NodalBasis,
    pub space: NodalBasis,
    energy_nodes: Vec<f64>,
    energy_mass: Vec<f64>,
}

impl Discretization {
    pub fn new(mesh: PhaseSpaceMesh, energy_degree: usize, space_degree: usize) -> Self {
        let energy = NodalBasis::new(energy_degree, energy_lobatto_points(energy_degree));
        let space = NodalBasis::new(space_degree, space_lobatto_points(space_degree));
        let (qx, qw) = gauss_legendre(energy_degree + 3);
        let n = energy.n();
        let mut energy_nodes = Vec::with_capacity(mesh.n_energy() * n);
        let mut energy_mass = Vec::with_capacity(mesh.n_energy() * n);
        for ie in 0..mesh.n_energy() {
            let (lo, hi) = mesh.energy_bounds(ie);
            let de = hi - lo;
            for p in 0..n {
                energy_nodes.push(lo + de * energy.nodes[p]);
                let w: f64 = qx
                    .iter()
                    .zip(&qw)
                    .map(|(&x, &w)| {
                        let eps = lo + de * x;
                        w * energy.lagrange.eval(x)[p] * eps * eps
                    })
                    .sum();
                energy_mass.push(w * de);
            }
        }
        Self {
            mesh,
            energy,
            space,
            energy_nodes,
            energy_mass,
        }
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_energy_nodes(&self) -> usize {
        self.energy.n()
    }

    pub fn n_space_nodes(&self) -> usize {
        self.space.n()
    }

    /// Spatial nodes per element, Nx^d.
    pub fn spatial_nodes(&self) -> usize {
        self.space.n().pow(self.dim() as u32)
    }

    pub fn nodes_per_element(&self) -> usize {
        self.energy.n() * self.spatial_nodes()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_element() * self.mesh.n_elements()
    }

    #[inline]
    pub fn node(&self, p: usize, q: [usize; 2]) -> usize {
        p + self.energy.n() * self.spatial_node(q)
    }

    #[inline]
    pub fn spatial_node(&self, q: [usize; 2]) -> usize {
        q[0] + self.space.n() * q[1]
    }

    /// (energy node, spatial node pair) of an element-local index.
    #[inline]
    pub fn unpack(&self, a: usize) -> (usize, [usize; 2]) {
        let ne = self.energy.n();
        let s = a / ne;
        (a % ne, [s % self.space.n(), s / self.space.n()])
    }

    #[inline]
    pub fn energy_node(&self, ie: usize, p: usize) -> f64 {
        self.energy_nodes[ie * self.energy.n() + p]
    }

    /// ω_p = ∫ℓ_p ε² dε over energy element `ie`.
    #[inline]
    pub fn energy_weight(&self, ie: usize, p: usize) -> f64 {
        self.energy_mass[ie * self.energy.n() + p]
    }

    /// Πᵢ wᵢ Δxᵢ for spatial node `q`.
    pub fn spatial_weight(&self, q: [usize; 2]) -> f64 {
        let mut w = self.space.weights[q[0]] * self.mesh.dx(0);
        if self.dim() == 2 {
            w *= self.space.weights[q[1]] * self.mesh.dx(1);
        }
        w
    }

    /// Physical coordinates of spatial node `q` in spatial cell `ks`.
    pub fn x_node(&self, ks: usize, q: [usize; 2]) -> [f64; 2] {
        let c = self.mesh.spatial_coords(ks);
        let mut x = [0.0; 2];
        for axis in 0..self.dim() {
            x[axis] = self.mesh.x_lo(axis, c[axis]) + self.mesh.dx(axis) * self.space.nodes[q[axis]];
        }
        x
    }

    pub fn node_mass(&self, e: usize, a: usize) -> f64 {
        let (_, ie) = self.mesh.split(e);
        let (p, q) = self.unpack(a);
        self.energy_weight(ie, p) * self.spatial_weight(q)
    }

    /// |K| = |K_ε|·ΠΔxᵢ.
    pub fn element_volume(&self, e: usize) -> f64 {
        let (_, ie) = self.mesh.split(e);
        let mut v = self.mesh.energy_volume(ie);
        for axis in 0..self.dim() {
            v *= self.mesh.dx(axis);
        }
        v
    }

    /// ε²-weighted cell average of one element's nodal values.
    pub fn cell_average(&self, e: usize, values: &[Conserved]) -> Conserved {
        let mut sum = Conserved::default();
        for (a, u) in values.iter().enumerate() {
            sum += *u * self.node_mass(e, a);
        }
        sum * (1.0 / self.element_volume(e))
    }

    /// Σ mass·U over the mesh.
    pub fn total(&self, field: &DGField) -> Conserved {
        let mut sum = Conserved::default();
        for e in 0..self.mesh.n_elements() {
            for (a, u) in field.element(e).iter().enumerate() {
                sum += *u * self.node_mass(e, a);
            }
        }
        sum
    }

    /// Nodal interpolant of `f(ε, x)`.
    pub fn project(&self, f: impl Fn(f64, [f64; 2]) -> Conserved) -> DGField {
        let npe = self.nodes_per_element();
        let mut data = Vec::with_capacity(self.n_nodes());
        for e in 0..self.mesh.n_elements() {
            let (ks, ie) = self.mesh.split(e);
            for a in 0..npe {
                let (p, q) = self.unpack(a);
                data.push(f(self.energy_node(ie, p), self.x_node(ks, q)));
            }
        }
        DGField { data, npe }
    }

    pub fn zeros(&self) -> DGField {
        DGField {
            data: vec![Conserved::default(); self.n_nodes()],
            npe: self.nodes_per_element(),
        }
    }
}

/// Nodal values of the conserved moments, element after element.
#[derive(Clone, Debug, PartialEq)]
pub struct DGField {
    pub data: Vec<Conserved>,
    npe: usize,
}

impl DGField {
    pub fn nodes_per_element(&self) -> usize {
        self.npe
    }

    pub fn n_elements(&self) -> usize {
        self.data.len() / self.npe
    }

    pub fn element(&self, e: usize) -> &[Conserved] {
        &self.data[e * self.npe..(e + 1) * self.npe]
    }

    pub fn element_mut(&mut self, e: usize) -> &mut [Conserved] {
        &mut self.data[e * self.npe..(e + 1) * self.npe]
    }

    /// self += s·x.
    pub fn axpy(&mut self, s: f64, x: &DGField) {
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += *b * s;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a = *a * s;
        }
    }
}
