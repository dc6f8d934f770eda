//! Operator assembly: boundary operators `A + Psi`, cylinder operators
//! `c(dt)(d/dt + A^t)`, adjoint restrictions, compact perturbations, the glued
//! double and the strong-Callias audit.

mod audit;
mod boundary;
mod cylinder;
mod double;

pub use audit::{audit_cylinder, audit_strong_callias, EssentialSupportReport, SupportBox};
pub use boundary::{build_boundary_operator, BoundaryOperator, CompactPerturbation, PotentialField};
pub use cylinder::{build_cylinder_operator, plateau, CylinderOperator};
pub use double::{glue_double, DoubledOperator, LoopIndex, MAX_DOUBLE_DIM};
