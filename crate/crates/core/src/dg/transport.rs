//! Assembly of the explicit transport operator T(u): spatial and energy surface terms
//! with Lax–Friedrichs fluxes, plus the weak volume terms, in collocated nodal form.

use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

use super::boundary::{ghost, BoundarySet, EnergyBoundary};
use super::field::{DGField, Discretization};
use super::fluid::{line_node, FluidField};
use super::flux::{energy_flux, lax_friedrichs};
use crate::error::{Error, Result};
use crate::kinematics::ThreeVelocity;
use crate::moments::{
    comoving, hat_from_conserved, round_onto_cone, spatial_flux, spatial_flux_with, u_tilde, Conserved,
    Primitive,
};
use crate::solvers::{c2p_picard, c2p_picard_from, SolverConfig};

/// Primitive moments from the previous evaluation, used as warm starts.
#[derive(Clone, Debug)]
pub struct PrimitiveCache {
    pub nodes: Vec<Primitive>,
    /// Per axis: low face of every element, two sides per point.
    low: [Vec<Primitive>; 2],
    /// Per axis: high boundary face of every element.
    high: [Vec<Primitive>; 2],
    /// Low energy face of every element at each spatial node, two sides.
    energy: Vec<Primitive>,
    /// Outer energy face.
    energy_high: Vec<Primitive>,
}

/// T(u) together with the net rate at which mass-weighted (E, F) leaves the domain.
#[derive(Clone, Debug)]
pub struct TransportOutput {
    pub rhs: DGField,
    pub outflow: Conserved,
    pub c2p_iterations: u64,
}

pub struct TransportOperator {
    pub disc: Discretization,
    pub fluid: FluidField,
    pub boundaries: BoundarySet,
    pub solver: SolverConfig,
}

/// Traces whose moments are all below this fraction of the element's mean energy and
/// still fail realizability are the roundoff residue of a limited near-vacuum point.
pub const VACUUM_ROUNDING: f64 = 1e-13;

/// Recovers M at a point, warm-starting from `guess` when it is realizable. `scale` is
/// the mean energy of the element the point belongs to.
#[inline]
pub(crate) fn recover(
    u: &Conserved,
    v: &ThreeVelocity,
    guess: &mut Primitive,
    scale: f64,
    cfg: &SolverConfig,
) -> Result<usize> {
    // Defects inside the solver tolerance are solved as they are, so their γ-flux
    // continues that of states just inside the cone.
    let uh = round_onto_cone(hat_from_conserved(u, v), v);
    let residue = VACUUM_ROUNDING * scale;
    if uh.e <= residue && uh.f.iter().all(|x| x.abs() <= residue) && !uh.is_realizable(v) {
        *guess = Primitive::new(0.0, [0.0; 3]);
        return Ok(0);
    }
    let (m, report) = if guess.j > 0.0 && guess.gamma(v) >= 0.0 {
        c2p_picard_from(&uh, v, *guess, cfg)?
    } else {
        c2p_picard(&uh, v, cfg)?
    };
    *guess = m;
    Ok(report.iterations)
}

#[inline]
fn dot_trace(values: impl Iterator<Item = Conserved>, basis: &[f64]) -> Conserved {
    let mut out = Conserved::default();
    for (u, b) in values.zip(basis) {
        out += u * *b;
    }
    out
}

impl TransportOperator {
    pub fn new(
        disc: Discretization,
        fluid: FluidField,
        boundaries: BoundarySet,
        solver: SolverConfig,
    ) -> Result<Self> {
        boundaries.validate(disc.dim())?;
        solver.validate()?;
        let dim = disc.dim();
        if fluid.periodic()[..dim] != boundaries.periodic_axes()[..dim] {
            return Err(Error::Config(
                "fluid field and boundary set disagree on periodicity".into(),
            ));
        }
        Ok(Self {
            disc,
            fluid,
            boundaries,
            solver,
        })
    }

    /// Transverse points per spatial face.
    fn transverse(&self) -> usize {
        if self.disc.dim() == 2 {
            self.disc.n_space_nodes()
        } else {
            1
        }
    }

    fn face_points(&self) -> usize {
        self.disc.n_energy_nodes() * self.transverse()
    }

    pub fn new_cache(&self) -> PrimitiveCache {
        let n = self.disc.mesh.n_elements();
        let fp = self.face_points();
        let nsn = self.disc.spatial_nodes();
        let empty = Primitive::default();
        PrimitiveCache {
            nodes: vec![empty; self.disc.n_nodes()],
            low: [vec![empty; n * fp * 2], vec![empty; n * fp * 2]],
            high: [vec![empty; n * fp], vec![empty; n * fp]],
            energy: vec![empty; n * nsn * 2],
            energy_high: vec![empty; n * nsn],
        }
    }

    #[inline]
    fn node_velocity(&self, ks: usize, s: usize) -> &ThreeVelocity {
        &self.fluid.velocity[ks * self.disc.spatial_nodes() + s]
    }

    /// Physical coordinates of a spatial face point.
    fn face_x(&self, ks: usize, axis: usize, side: usize, t: usize) -> [f64; 2] {
        let d = &self.disc;
        let c = d.mesh.spatial_coords(ks);
        let mut q = [0, 0];
        if d.dim() == 2 {
            q[1 - axis] = t;
        }
        let mut x = d.x_node(ks, q);
        x[axis] = d.mesh.x_lo(axis, c[axis]) + side as f64 * d.mesh.dx(axis);
        x
    }

    /// Recovers primitives at every node; the cache holds the result afterwards.
    pub fn recover_nodes(&self, u: &DGField, cache: &mut PrimitiveCache) -> Result<u64> {
        let npe = self.disc.nodes_per_element();
        let ne = self.disc.n_energy_nodes();
        let iters = AtomicU64::new(0);
        cache
            .nodes
            .par_chunks_mut(npe)
            .zip(u.data.par_chunks(npe))
            .enumerate()
            .try_for_each(|(e, (ms, us))| -> Result<()> {
                let (ks, _) = self.disc.mesh.split(e);
                let scale = self.disc.cell_average(e, us).e;
                let mut n = 0;
                for a in 0..npe {
                    let v = self.node_velocity(ks, a / ne);
                    n += recover(&us[a], v, &mut ms[a], scale, &self.solver)
                        .map_err(|err| err.at(format!("element {e} node {a}")))?;
                }
                iters.fetch_add(n as u64, Ordering::Relaxed);
                Ok(())
            })?;
        Ok(iters.into_inner())
    }

    /// Evaluates T(u) and the boundary outflow rate.
    pub fn apply(&self, u: &DGField, cache: &mut PrimitiveCache) -> Result<TransportOutput> {
        let d = &self.disc;
        let mesh = &d.mesh;
        let dim = d.dim();
        let npe = d.nodes_per_element();
        let nel = mesh.n_elements();
        let ne = d.n_energy_nodes();
        let nq = d.n_space_nodes();
        let nsn = d.spatial_nodes();
        let ntr = self.transverse();
        let fp = self.face_points();
        let cfg = &self.solver;
        let iters = AtomicU64::new(self.recover_nodes(u, cache)?);
        let scales: Vec<f64> = (0..nel).map(|e| d.cell_average(e, u.element(e)).e).collect();

        // Spatial faces: each element owns its low face, plus its high face on a
        // non-periodic boundary.
        let mut low_flux = [
            vec![Conserved::default(); nel * fp],
            vec![Conserved::default(); nel * fp],
        ];
        let mut high_flux = [
            vec![Conserved::default(); nel * fp],
            vec![Conserved::default(); nel * fp],
        ];
        for axis in 0..dim {
            let bc = &self.boundaries.spatial[axis];
            let [lf, hf] = [&mut low_flux[axis], &mut high_flux[axis]];
            let PrimitiveCache { low, high, .. } = cache;
            lf.par_chunks_mut(fp)
                .zip(hf.par_chunks_mut(fp))
                .zip(low[axis].par_chunks_mut(2 * fp))
                .zip(high[axis].par_chunks_mut(fp))
                .enumerate()
                .try_for_each(|(e, (((lf, hf), lc), hc))| -> Result<()> {
                    let (ks, ie) = mesh.split(e);
                    let ue = u.element(e);
                    let nb_low = self.fluid.neighbor(d, ks, axis, 0).map(|k| mesh.element(k, ie));
                    let at_high = self.fluid.neighbor(d, ks, axis, 1).is_none();
                    let mut n = 0;
                    for t in 0..ntr {
                        let line: Vec<usize> = (0..nq).map(|j| line_node(nq, axis, j, t)).collect();
                        for p in 0..ne {
                            let pt = p + ne * t;
                            let eps = d.energy_node(ie, p);
                            let own = |basis: &[f64]| dot_trace(line.iter().map(|&s| ue[p + ne * s]), basis);
                            let loc = || format!("element {e} axis {axis} face point {pt}");
                            // Low face: this element supplies the plus side.
                            let v = self.fluid.face_velocity(ks, axis, 0, t);
                            let u_plus = own(&d.space.left);
                            n += recover(&u_plus, v, &mut lc[2 * pt + 1], scales[e], cfg)
                                .map_err(|x| x.at(loc()))?;
                            let m_plus = lc[2 * pt + 1];
                            let (u_minus, f_minus) = match nb_low {
                                Some(en) => {
                                    let un = u.element(en);
                                    let um = dot_trace(line.iter().map(|&s| un[p + ne * s]), &d.space.right);
                                    n += recover(&um, v, &mut lc[2 * pt], scales[en], cfg)
                                        .map_err(|x| x.at(loc()))?;
                                    (um, spatial_flux(&um, &lc[2 * pt], v, axis))
                                }
                                None => ghost(
                                    &bc[0],
                                    axis,
                                    (&u_plus, &m_plus),
                                    v,
                                    eps,
                                    self.face_x(ks, axis, 0, t),
                                )
                                .map_err(|x| x.at(loc()))?,
                            };
                            lf[pt] = lax_friedrichs(
                                &f_minus,
                                &spatial_flux(&u_plus, &m_plus, v, axis),
                                &u_minus,
                                &u_plus,
                                1.0,
                            );
                            if at_high {
                                let v = self.fluid.face_velocity(ks, axis, 1, t);
                                let um = own(&d.space.right);
                                n += recover(&um, v, &mut hc[pt], scales[e], cfg).map_err(|x| x.at(loc()))?;
                                let mm = hc[pt];
                                let (ug, fg) =
                                    ghost(&bc[1], axis, (&um, &mm), v, eps, self.face_x(ks, axis, 1, t))
                                        .map_err(|x| x.at(loc()))?;
                                hf[pt] = lax_friedrichs(&spatial_flux(&um, &mm, v, axis), &fg, &um, &ug, 1.0);
                            }
                        }
                    }
                    iters.fetch_add(n as u64, Ordering::Relaxed);
                    Ok(())
                })?;
        }

        // Energy faces: each element owns its low face; the top element also owns ε_max.
        let nen = mesh.n_energy();
        let mut e_low = vec![Conserved::default(); nel * nsn];
        let mut e_high = vec![Conserved::default(); nel * nsn];
        let open = self.boundaries.energy == EnergyBoundary::Open;
        {
            let PrimitiveCache {
                energy, energy_high, ..
            } = cache;
            e_low
                .par_chunks_mut(nsn)
                .zip(e_high.par_chunks_mut(nsn))
                .zip(energy.par_chunks_mut(2 * nsn))
                .zip(energy_high.par_chunks_mut(nsn))
                .enumerate()
                .try_for_each(|(e, (((lo, hi), ec), hc))| -> Result<()> {
                    let (ks, ie) = mesh.split(e);
                    let a_eps = self.fluid.a_eps[ks];
                    if a_eps == 0.0 {
                        return Ok(());
                    }
                    let ue = u.element(e);
                    let (eps_lo, _) = mesh.energy_bounds(ie);
                    let mut n = 0;
                    for s in 0..nsn {
                        let v = self.node_velocity(ks, s);
                        let strain = self.fluid.gradient[ks * nsn + s].strain();
                        let loc = || format!("element {e} energy face node {s}");
                        let own = |basis: &[f64]| dot_trace((0..ne).map(|p| ue[p + ne * s]), basis);
                        if ie > 0 || eps_lo > 0.0 {
                            let up = own(&d.energy.left);
                            n += recover(&up, v, &mut ec[2 * s + 1], scales[e], cfg)
                                .map_err(|x| x.at(loc()))?;
                            let mp = ec[2 * s + 1];
                            lo[s] = if ie > 0 {
                                let un = u.element(e - 1);
                                let um = dot_trace((0..ne).map(|p| un[p + ne * s]), &d.energy.right);
                                n += recover(&um, v, &mut ec[2 * s], scales[e - 1], cfg)
                                    .map_err(|x| x.at(loc()))?;
                                let mm = ec[2 * s];
                                lax_friedrichs(
                                    &energy_flux(&mm, v, &strain),
                                    &energy_flux(&mp, v, &strain),
                                    &u_tilde(&mm, v),
                                    &u_tilde(&mp, v),
                                    a_eps,
                                )
                            } else if open {
                                energy_flux(&mp, v, &strain)
                            } else {
                                Conserved::default()
                            };
                        }
                        if ie + 1 == nen && open {
                            let um = own(&d.energy.right);
                            n += recover(&um, v, &mut hc[s], scales[e], cfg).map_err(|x| x.at(loc()))?;
                            hi[s] = energy_flux(&hc[s], v, &strain);
                        }
                    }
                    iters.fetch_add(n as u64, Ordering::Relaxed);
                    Ok(())
                })?;
        }

        // Element residuals.
        let mut rhs = d.zeros();
        let nodes = &cache.nodes;
        rhs.data.par_chunks_mut(npe).enumerate().for_each(|(e, r)| {
            let (ks, ie) = mesh.split(e);
            let ue = u.element(e);
            let me = &nodes[e * npe..(e + 1) * npe];
            let com: Vec<_> = (0..npe)
                .map(|a| comoving(&me[a], self.node_velocity(ks, a / ne)))
                .collect();
            for axis in 0..dim {
                let dx = mesh.dx(axis);
                let nb_high = self.fluid.neighbor(d, ks, axis, 1).map(|k| mesh.element(k, ie));
                for t in 0..ntr {
                    let line: Vec<usize> = (0..nq).map(|j| line_node(nq, axis, j, t)).collect();
                    for p in 0..ne {
                        let pt = p + ne * t;
                        let fl = low_flux[axis][e * fp + pt];
                        let fh = match nb_high {
                            Some(en) => low_flux[axis][en * fp + pt],
                            None => high_flux[axis][e * fp + pt],
                        };
                        let fvol: Vec<Conserved> = line
                            .iter()
                            .map(|&s| {
                                let a = p + ne * s;
                                spatial_flux_with(&ue[a], &me[a], self.node_velocity(ks, s), &com[a], axis)
                            })
                            .collect();
                        for (j, &s) in line.iter().enumerate() {
                            let mut acc = fh * d.space.right[j] - fl * d.space.left[j];
                            for (rr, fr) in fvol.iter().enumerate() {
                                acc -= *fr * (d.space.weights[rr] * d.space.dmat[rr][j]);
                            }
                            r[p + ne * s] -= acc * (1.0 / (dx * d.space.weights[j]));
                        }
                    }
                }
            }
            if self.fluid.a_eps[ks] > 0.0 {
                let (el, eh) = mesh.energy_bounds(ie);
                let (el3, eh3) = (el * el * el, eh * eh * eh);
                for s in 0..nsn {
                    let v = self.node_velocity(ks, s);
                    let strain = self.fluid.gradient[ks * nsn + s].strain();
                    let fl = e_low[e * nsn + s];
                    let fh = if ie + 1 < nen {
                        e_low[(e + 1) * nsn + s]
                    } else {
                        e_high[e * nsn + s]
                    };
                    let fvol: Vec<Conserved> = (0..ne)
                        .map(|rr| {
                            let eps = d.energy_node(ie, rr);
                            energy_flux(&me[rr + ne * s], v, &strain) * (eps * eps * eps)
                        })
                        .collect();
                    for p in 0..ne {
                        let mut acc = fh * (eh3 * d.energy.right[p]) - fl * (el3 * d.energy.left[p]);
                        for (rr, fr) in fvol.iter().enumerate() {
                            acc -= *fr * (d.energy.weights[rr] * d.energy.dmat[rr][p]);
                        }
                        r[p + ne * s] -= acc * (1.0 / d.energy_weight(ie, p));
                    }
                }
            }
        });

        // Net outflow rate, summed in a fixed order.
        let mut outflow = Conserved::default();
        for axis in 0..dim {
            if self.boundaries.periodic_axes()[axis] {
                continue;
            }
            let n_axis = mesh.cells()[axis];
            for e in 0..nel {
                let (ks, ie) = mesh.split(e);
                let c = mesh.spatial_coords(ks)[axis];
                for t in 0..ntr {
                    let tw = if dim == 2 {
                        d.space.weights[t] * mesh.dx(1 - axis)
                    } else {
                        1.0
                    };
                    for p in 0..ne {
                        let w = d.energy_weight(ie, p) * tw;
                        let pt = p + ne * t;
                        if c == 0 {
                            outflow -= low_flux[axis][e * fp + pt] * w;
                        }
                        if c + 1 == n_axis {
                            outflow += high_flux[axis][e * fp + pt] * w;
                        }
                    }
                }
            }
        }
        for e in 0..nel {
            let (_, ie) = mesh.split(e);
            let (el, eh) = mesh.energy_bounds(ie);
            for s in 0..nsn {
                let q = [s % nq, s / nq];
                let sw = d.spatial_weight(q);
                if ie == 0 && el > 0.0 {
                    outflow -= e_low[e * nsn + s] * (el * el * el * sw);
                }
                if ie + 1 == nen {
                    outflow += e_high[e * nsn + s] * (eh * eh * eh * sw);
                }
            }
        }
        Ok(TransportOutput {
            rhs,
            outflow,
            c2p_iterations: iters.into_inner(),
        })
    }
}
