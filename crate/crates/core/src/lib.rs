//! Realizability-preserving discontinuous Galerkin solver for special-relativistic,
//! energy-resolved two-moment radiation transport with an analytic Minerbo closure.

pub mod closure;
pub mod dg;
pub mod error;
pub mod harness;
pub mod kinematics;
pub mod limiters;
pub mod moments;
pub mod solvers;
pub mod timeint;

pub use error::{Error, Result};
pub use kinematics::ThreeVelocity;
pub use moments::{Conserved, Hat, Primitive};
