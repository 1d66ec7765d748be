//! hp-adaptive hybridized discontinuous Galerkin methods for one- and
//! two-field Friedrichs systems on triangular meshes of a rectangle.
//!
//! The pipeline is: build a [`mesh::Mesh`], derive its
//! [`skeleton::Skeleton`], wrap a [`friedrichs::System`] in an
//! [`hdg::Discretization`] and call [`hdg::solve`]. Adaptive runs live in
//! [`adapt`]; dual-weighted-residual estimates in [`adjoint`].

pub mod adapt;
pub mod adjoint;
pub mod audit;
pub mod basis;
pub mod conservation;
pub mod error;
pub mod friedrichs;
pub mod hdg;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod skeleton;

pub use error::{HdgError, Result};
