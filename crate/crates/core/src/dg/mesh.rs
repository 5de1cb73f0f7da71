use crate::error::{Error, Result};

/// Cartesian phase-space mesh: one comoving-energy axis times one or two spatial axes.
///
/// Elements are ordered energy-fastest: `((iy * nx + ix) * ne + ie)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceMesh {
    dim: usize,
    cells: [usize; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    energy_edges: Vec<f64>,
}

impl PhaseSpaceMesh {
    /// `cells[1]` is ignored (forced to 1) when `dim == 1`.
    pub fn new(
        dim: usize,
        cells: [usize; 2],
        lo: [f64; 2],
        hi: [f64; 2],
        energy_edges: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("spatial dimension {dim} not in 1..=2")));
        }
        let cells = if dim == 1 { [cells[0], 1] } else { cells };
        for a in 0..dim {
            if cells[a] == 0 {
                return Err(Error::Config("element count must be positive".into()));
            }
            if !(hi[a] > lo[a]) {
                return Err(Error::Config(format!("empty spatial interval on axis {a}")));
            }
        }
        if energy_edges.len() < 2 {
            return Err(Error::Config("energy grid needs at least one element".into()));
        }
        if !(energy_edges[0] >= 0.0) || energy_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "energy edges must be nonnegative and strictly increasing".into(),
            ));
        }
        let (lo, hi) = if dim == 1 {
            ([lo[0], 0.0], [hi[0], 1.0])
        } else {
            (lo, hi)
        };
        Ok(Self {
            dim,
            cells,
            lo,
            hi,
            energy_edges,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn lo(&self) -> [f64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 2] {
        self.hi
    }

    pub fn energy_edges(&self) -> &[f64] {
        &self.energy_edges
    }

    pub fn n_energy(&self) -> usize {
        self.energy_edges.len() - 1
    }

    pub fn n_spatial(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn n_elements(&self) -> usize {
        self.n_spatial() * self.n_energy()
    }

    pub fn dx(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    /// Lower edge of spatial cell `i` along `axis`.
    pub fn x_lo(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + self.dx(axis) * i as f64
    }

    pub fn energy_bounds(&self, ie: usize) -> (f64, f64) {
        (self.energy_edges[ie], self.energy_edges[ie + 1])
    }

    /// |K_ε| = (ε_H³ − ε_L³)/3.
    pub fn energy_volume(&self, ie: usize) -> f64 {
        let (a, b) = self.energy_bounds(ie);
        (b * b * b - a * a * a) / 3.0
    }

    pub fn spatial_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells[0] + ix
    }

    /// (ix, iy) of a spatial cell.
    pub fn spatial_coords(&self, ks: usize) -> [usize; 2] {
        [ks % self.cells[0], ks / self.cells[0]]
    }

    pub fn element(&self, ks: usize, ie: usize) -> usize {
        ks * self.n_energy() + ie
    }

    /// (spatial cell, energy cell) of an element.
    pub fn split(&self, e: usize) -> (usize, usize) {
        (e / self.n_energy(), e % self.n_energy())
    }
}

/// `n` equal energy elements on [lo, hi].
pub fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// `n` energy elements on [lo, hi] whose widths grow by `ratio` from one to the next.
pub fn geometric_edges(lo: f64, hi: f64, n: usize, ratio: f64) -> Result<Vec<f64>> {
    if !(ratio > 0.0) {
        return Err(Error::Config(format!("geometric ratio {ratio} must be positive")));
    }
    if (ratio - 1.0).abs() < 1e-14 {
        return Ok(uniform_edges(lo, hi, n));
    }
    let first = (hi - lo) * (ratio - 1.0) / (ratio.powi(n as i32) - 1.0);
    let mut edges = Vec::with_capacity(n + 1);
    let mut x = lo;
    let mut w = first;
    edges.push(lo);
    for _ in 0..n {
        x += w;
        w *= ratio;
        edges.push(x);
    }
    edges[n] = hi;
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geometric_grid() {
        let e = geometric_edges(0.0, 50.0, 16, 1.1).unwrap();
        assert_eq!(e.len(), 17);
        assert_eq!(e[16], 50.0);
        let w: Vec<f64> = e.windows(2).map(|p| p[1] - p[0]).collect();
        for p in w.windows(2) {
            assert_relative_eq!(p[1] / p[0], 1.1, max_relative = 1e-10);
        }
        assert_eq!(
            geometric_edges(0.0, 1.0, 4, 1.0).unwrap(),
            uniform_edges(0.0, 1.0, 4)
        );
        assert!(geometric_edges(0.0, 1.0, 4, 0.0).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let m = PhaseSpaceMesh::new(2, [3, 4], [0.0; 2], [1.0, 2.0], uniform_edges(0.0, 1.0, 5)).unwrap();
        assert_eq!(m.n_elements(), 60);
        for e in 0..m.n_elements() {
            let (ks, ie) = m.split(e);
            assert_eq!(m.element(ks, ie), e);
            let [ix, iy] = m.spatial_coords(ks);
            assert_eq!(m.spatial_index(ix, iy), ks);
        }
        assert_relative_eq!(m.dx(1), 0.5);
        assert_relative_eq!(m.energy_volume(0), 0.2f64.powi(3) / 3.0);
    }

    #[test]
    fn rejects_bad_meshes() {
        let e = uniform_edges(0.0, 1.0, 2);
        assert!(PhaseSpaceMesh::new(3, [1, 1], [0.0; 2], [1.0; 2], e.clone()).is_err());
        assert!(PhaseSpaceMesh::new(1, [0, 1], [0.0; 2], [1.0; 2], e.clone()).is_err());
        assert!(PhaseSpaceMesh::new(1, [2, 1], [0.0; 2], [1.0; 2], vec![1.0, 0.5]).is_err());
        assert!(PhaseSpaceMesh::new(1, [2, 1], [0.0; 2], [1.0; 2], vec![-1.0, 0.5]).is_err());
        let m = PhaseSpaceMesh::new(1, [2, 7], [0.0; 2], [1.0; 2], e).unwrap();
        assert_eq!(m.cells(), [2, 1]);
    }
}
