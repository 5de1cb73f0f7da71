//! Shared fixtures for the criterion benches.

use radmoment::dg::DGField;
use radmoment::harness::{Problem, ProblemKind};
use radmoment::moments::{conserved_from_primitive, hat_from_conserved};
use radmoment::timeint::Integrator;
use radmoment::{Hat, Primitive, ThreeVelocity};

/// A moving-fluid state with flux factor `h` along x, in the lab frame of `v`.
pub fn hat_state(v: f64, h: f64) -> (Hat, ThreeVelocity) {
    let v = ThreeVelocity::new([v, 0.0, 0.0]).expect("subluminal");
    let u = conserved_from_primitive(&Primitive::new(1.0, [h, 0.0, 0.0]), &v).expect("realizable");
    (hat_from_conserved(&u, &v), v)
}

/// The desk Doppler benchmark on `cells` elements: a 1D spectral field on a velocity
/// ramp, so every transport term including the energy-space flux is active.
pub fn doppler(cells: usize) -> (Integrator, DGField) {
    let mut p = Problem::defaults(ProblemKind::Doppler, false);
    p.cells = [cells, 1];
    p.build().expect("doppler builds")
}
