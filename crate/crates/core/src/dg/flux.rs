//! Physical energy-space flux and the Lax–Friedrichs numerical fluxes.

use crate::closure::q_contract;
use crate::error::{Error, Result};
use crate::kinematics::ThreeVelocity;
use crate::moments::{spatial_flux, Conserved, Primitive};

/// F^ε = −(X⁰, Xʲ) with X^μ = Q^{μνρ}A_{νρ}/ε for the symmetrized velocity gradient A.
#[inline]
pub fn energy_flux(m: &Primitive, v: &ThreeVelocity, strain: &[[f64; 4]; 4]) -> Conserved {
    let x = q_contract(m.j, &m.h_up(v), &v.four_velocity(), strain);
    Conserved::new(-x[0], [-x[1], -x[2], -x[3]])
}

/// ½[(F⁻ + F⁺) − a(W⁺ − W⁻)], where W is the dissipated state.
#[inline]
pub fn lax_friedrichs(
    f_minus: &Conserved,
    f_plus: &Conserved,
    w_minus: &Conserved,
    w_plus: &Conserved,
    a: f64,
) -> Conserved {
    (*f_minus + *f_plus - (*w_plus - *w_minus) * a) * 0.5
}

fn require(u: &Conserved) -> Result<()> {
    if u.is_realizable() {
        Ok(())
    } else {
        Err(Error::NonRealizable {
            what: "face trace",
            gamma: u.gamma(),
            scale: u.e,
        })
    }
}

/// Spatial flux along `axis` with unit wave speed.
pub fn spatial_numerical_flux(
    minus: (&Conserved, &Primitive),
    plus: (&Conserved, &Primitive),
    v: &ThreeVelocity,
    axis: usize,
) -> Result<Conserved> {
    require(minus.0)?;
    require(plus.0)?;
    let fm = spatial_flux(minus.0, minus.1, v, axis);
    let fp = spatial_flux(plus.0, plus.1, v, axis);
    Ok(lax_friedrichs(&fm, &fp, minus.0, plus.0, 1.0))
}

/// Energy flux across an energy face with dissipation on Ũ and speed `a_eps`.
pub fn energy_numerical_flux(
    minus: &Primitive,
    plus: &Primitive,
    v: &ThreeVelocity,
    strain: &[[f64; 4]; 4],
    a_eps: f64,
) -> Conserved {
    let fm = energy_flux(minus, v, strain);
    let fp = energy_flux(plus, v, strain);
    lax_friedrichs(
        &fm,
        &fp,
        &crate::moments::u_tilde(minus, v),
        &crate::moments::u_tilde(plus, v),
        a_eps,
    )
}
