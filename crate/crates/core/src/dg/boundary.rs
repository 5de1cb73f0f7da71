use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kinematics::ThreeVelocity;
use crate::moments::{conserved_from_primitive, spatial_flux, Conserved, Primitive};

/// Prescribed comoving moments on an inflow face as a function of (ε, x).
pub type InflowFn = Arc<dyn Fn(f64, [f64; 2]) -> Primitive + Send + Sync>;

/// Ghost-state rule on one spatial face of the domain.
#[derive(Clone)]
pub enum Boundary {
    Periodic,
    /// Ghost equals the interior trace.
    Outflow,
    /// Ghost is the mirror image of the interior trace, fluid velocity included: the
    /// normal components of F, H and v flip sign.
    Reflecting,
    Inflow(InflowFn),
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "Periodic",
            Boundary::Outflow => "Outflow",
            Boundary::Reflecting => "Reflecting",
            Boundary::Inflow(_) => "Inflow",
        })
    }
}

/// Treatment of the outermost energy face; the ε = 0 face carries no flux.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EnergyBoundary {
    /// Zero energy flux through ε_max.
    #[default]
    Closed,
    /// Outflow ghost copy at ε_max.
    Open,
}

#[derive(Clone, Debug)]
pub struct BoundarySet {
    /// Indexed `[axis][side]`, side 0 = low.
    pub spatial: [[Boundary; 2]; 2],
    pub energy: EnergyBoundary,
}

impl BoundarySet {
    pub fn periodic() -> Self {
        Self {
            spatial: [
                [Boundary::Periodic, Boundary::Periodic],
                [Boundary::Periodic, Boundary::Periodic],
            ],
            energy: EnergyBoundary::Closed,
        }
    }

    pub fn uniform(b: Boundary) -> Self {
        Self {
            spatial: [[b.clone(), b.clone()], [b.clone(), b]],
            energy: EnergyBoundary::Closed,
        }
    }

    pub fn periodic_axes(&self) -> [bool; 2] {
        [0, 1].map(|a| matches!(self.spatial[a][0], Boundary::Periodic))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for a in 0..dim {
            let lo = matches!(self.spatial[a][0], Boundary::Periodic);
            let hi = matches!(self.spatial[a][1], Boundary::Periodic);
            if lo != hi {
                return Err(Error::Config(format!(
                    "axis {a}: periodic boundaries must be paired"
                )));
            }
        }
        Ok(())
    }
}

/// Ghost state outside a non-periodic face and its physical flux along `axis`.
pub(crate) fn ghost(
    b: &Boundary,
    axis: usize,
    interior: (&Conserved, &Primitive),
    v: &ThreeVelocity,
    eps: f64,
    x: [f64; 2],
) -> Result<(Conserved, Conserved)> {
    let (u, m) = interior;
    match b {
        Boundary::Periodic | Boundary::Outflow => Ok((*u, spatial_flux(u, m, v, axis))),
        Boundary::Reflecting => {
            // The mirror state under the mirrored velocity has flux −R f(u), where R
            // flips component `axis` of F; no recovery at the ghost is needed.
            let mut ug = *u;
            ug.f[axis] = -ug.f[axis];
            let mut fg = -spatial_flux(u, m, v, axis);
            fg.f[axis] = -fg.f[axis];
            Ok((ug, fg))
        }
        Boundary::Inflow(f) => {
            let mg = f(eps, x);
            let ug = conserved_from_primitive(&mg, v)?;
            Ok((ug, spatial_flux(&ug, &mg, v, axis)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghost_rules() {
        let v = ThreeVelocity::rest();
        let u = Conserved::new(1.0, [0.3, 0.2, 0.0]);
        let m = Primitive::new(1.0, [0.3, 0.2, 0.0]);
        let (g, f) = ghost(&Boundary::Outflow, 0, (&u, &m), &v, 1.0, [0.0; 2]).unwrap();
        assert_eq!(g, u);
        assert_eq!(f, spatial_flux(&u, &m, &v, 0));
        let inflow = Boundary::Inflow(Arc::new(|eps, _| Primitive::new(eps, [0.5 * eps, 0.0, 0.0])));
        let (g, _) = ghost(&inflow, 0, (&u, &m), &v, 2.0, [0.0; 2]).unwrap();
        assert_eq!(g, Conserved::new(2.0, [1.0, 0.0, 0.0]));
        assert_eq!(format!("{inflow:?}"), "Inflow");
    }

    #[test]
    fn reflecting_ghost_is_the_mirror_state() {
        // Oracle: mirror v, F and H explicitly and evaluate the flux of that state.
        let v = ThreeVelocity::new([0.2, 0.3, 0.0]).unwrap();
        let m = Primitive::new(1.0, [0.1, 0.4, 0.05]);
        let u = conserved_from_primitive(&m, &v).unwrap();
        for axis in 0..2 {
            let (g, f) = ghost(&Boundary::Reflecting, axis, (&u, &m), &v, 1.0, [0.0; 2]).unwrap();
            let mut vm = v.v;
            vm[axis] = -vm[axis];
            let vm = ThreeVelocity::new(vm).unwrap();
            let mut mm = m;
            mm.h[axis] = -mm.h[axis];
            let um = conserved_from_primitive(&mm, &vm).unwrap();
            let fm = spatial_flux(&um, &mm, &vm, axis);
            for c in 0..4 {
                assert!((g.to_array()[c] - um.to_array()[c]).abs() < 1e-14, "axis {axis}");
                assert!((f.to_array()[c] - fm.to_array()[c]).abs() < 1e-14, "axis {axis}");
            }
        }
    }

    #[test]
    fn periodic_pairs() {
        let mut b = BoundarySet::periodic();
        assert!(b.validate(2).is_ok());
        assert_eq!(b.periodic_axes(), [true, true]);
        b.spatial[1][0] = Boundary::Outflow;
        assert!(b.validate(1).is_ok());
        assert!(b.validate(2).is_err());
    }
}
