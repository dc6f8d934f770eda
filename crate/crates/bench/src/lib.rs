//! Fixtures shared by the benchmarks.

use callias_core::grid::{make_clifford, BoundarySlice};
use callias_core::ops::{build_boundary_operator, BoundaryOperator, PotentialField};

/// Quadratic bowl of unit strength plus `mass` on an `n x n` truncation of `[-radius, radius]^2`.
pub fn bowl(n: usize, radius: f64, mass: f64) -> BoundaryOperator {
    let slice = BoundarySlice::square(n, radius).expect("valid square slice");
    let f = PotentialField::Bowl { strength: 1.0 }.sample(&slice).expect("finite field");
    build_boundary_operator(&slice, &make_clifford(2).expect("rank 2"), &f, mass).expect("model operator")
}
