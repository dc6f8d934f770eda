//! Linear algebra kernels shared by the operator, spectral and index modules.
//!
//! Dense factorizations come from `faer`; the banded solver, inertia counting
//! and the shift-invert block Krylov eigensolver are implemented here because
//! the lattice operators are banded in site-major order.

mod banded;
mod dense;
mod krylov;
mod sparse;

pub use banded::{inertia, BandedLu, Inertia};
pub use dense::{
    hermitian_eigen, hermitian_part_deviation, max_abs, orthogonal_complement, orthonormalize,
    principal_angle_sines, range_basis, rank_with_tol, singular_values, subspace_intersection_dim, svd_thin,
};
pub use krylov::{shift_invert_eigs, KrylovOptions};
pub use sparse::CsrMatrix;

/// Complex scalar used throughout.
pub type C64 = faer::c64;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
