//! Nodal discontinuous Galerkin discretization of phase space (energy × position).

pub mod boundary;
pub mod field;
pub mod fluid;
pub mod flux;
pub mod mesh;
pub mod quadrature;
pub mod transport;

pub use boundary::{Boundary, BoundarySet, EnergyBoundary, InflowFn};
pub use field::{DGField, Discretization};
pub use fluid::{a_eps_max, FluidField, Opacity, VelocityGradient};
pub use mesh::{geometric_edges, uniform_edges, PhaseSpaceMesh};
pub use transport::{PrimitiveCache, TransportOperator, TransportOutput};
