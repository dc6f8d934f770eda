//! Finite-dimensional models of strongly Callias-type operators on cylinders.
//!
//! Boundary operators live on a finite slice (a point set or a truncated plane
//! grid); cylinder operators discretise `c(dt)(d/dt + A^t)` on a time grid.
//! On top of these the crate computes boundary value problem indices, spectral
//! flow and relative eta invariants.

pub mod error;
pub mod grid;
pub mod linalg;
pub mod ops;
pub mod spectral;
pub mod bvp;
pub mod flow_eta;

pub use error::{Error, Result};
