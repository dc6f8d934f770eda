use std::sync::Arc;

use faer::Mat;

use super::boundary::BoundaryOperator;
use super::cylinder::CylinderOperator;
use crate::error::{Error, Result};
use crate::linalg::{c, rank_with_tol, singular_values, C64};

/// Largest dense system the double assembles.
pub const MAX_DOUBLE_DIM: usize = 6000;

/// The closed-loop operator on the doubled time circle `[0, L1 + L2]`.
///
/// On the first half it is `d1`. On the second half it is `-(d2)*` read backwards
/// in time; after the bundle identification `u -> c(dt) u` this becomes
/// `c(dt)(d/dt + A2^{L1 + L2 - t})`, so the glued family is `d1`'s family followed by
/// `d2`'s family in reverse order and the loop is periodic.
#[derive(Debug, Clone)]
pub struct DoubledOperator {
    family: Vec<Arc<BoundaryOperator>>,
    steps: Vec<f64>,
    label: String,
}

/// Kernel and cokernel dimensions of the periodic operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopIndex {
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub rank_tol: f64,
}

/// Glues two compatible cylinder operators along both ends.
pub fn glue_double(d1: &CylinderOperator, d2: &CylinderOperator) -> Result<DoubledOperator> {
    if d1.slice() != d2.slice() {
        return Err(Error::IncompatibleGlue("operators live on different slices".into()));
    }
    if d1.left_operator() != d2.left_operator() {
        return Err(Error::IncompatibleGlue("left end restrictions differ".into()));
    }
    if d1.right_operator() != d2.right_operator() {
        return Err(Error::IncompatibleGlue("right end restrictions differ".into()));
    }
    let mut family: Vec<Arc<BoundaryOperator>> = d1.family().to_vec();
    family.extend(d2.family().iter().rev().cloned());
    let mut steps = vec![d1.timegrid().step(); d1.intervals()];
    steps.extend(std::iter::repeat(d2.timegrid().step()).take(d2.intervals()));
    Ok(DoubledOperator {
        family,
        steps,
        label: format!("double({},{})", d1.label(), d2.label()),
    })
}

impl DoubledOperator {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn intervals(&self) -> usize {
        self.family.len()
    }

    pub fn slice_dim(&self) -> usize {
        self.family[0].dim()
    }

    pub fn family(&self) -> &[Arc<BoundaryOperator>] {
        &self.family
    }

    /// True if every interval carries the same boundary operator.
    pub fn is_time_independent(&self) -> bool {
        self.family.iter().all(|op| op.matrix() == self.family[0].matrix())
    }

    /// Dense periodic matrix: row block `k` couples nodes `k` and `k + 1 mod 2K`.
    pub fn to_dense(&self) -> Result<Mat<C64>> {
        let n = self.slice_dim();
        let kk = self.family.len();
        let dim = n * kk;
        if dim > MAX_DOUBLE_DIM {
            return Err(Error::TooLarge(format!("doubled operator of dimension {dim}")));
        }
        let r = self.family[0].slice().fiber_rank();
        let clifford = self.family[0].clifford();
        let mut m = Mat::<C64>::zeros(dim, dim);
        for k in 0..kk {
            let h = self.steps[k];
            let next = (k + 1) % kk;
            let a = &self.family[k];
            for i in 0..n {
                let cdt = c(0.0, clifford.grading_sign(i % r));
                m[(k * n + i, k * n + i)] += cdt * (-1.0 / h);
                m[(k * n + i, next * n + i)] += cdt * (1.0 / h);
                for (j, v) in a.matrix().row(i) {
                    m[(k * n + i, k * n + j)] += cdt * v * 0.5;
                    m[(k * n + i, next * n + j)] += cdt * v * 0.5;
                }
            }
        }
        Ok(m)
    }

    /// Index of the loop operator by dense SVD rank.
    pub fn index(&self) -> Result<LoopIndex> {
        let m = self.to_dense()?;
        let sv = singular_values(m.as_ref())?;
        let dim = m.nrows();
        let smax = sv.first().copied().unwrap_or(0.0);
        let rank_tol = dim as f64 * f64::EPSILON * smax;
        let rank = rank_with_tol(&sv, rank_tol);
        Ok(LoopIndex {
            dim_ker: m.ncols() - rank,
            dim_coker: m.nrows() - rank,
            index: m.ncols() as i64 - m.nrows() as i64,
            rank_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_clifford, BoundarySlice, TimeGrid};
    use crate::ops::build_boundary_operator;

    #[test]
    fn constant_double_kernel_is_boundary_kernel() {
        // Fourier oracle: on the circle the Cayley monodromy has eigenvalue 1 only
        // on ker A, so the loop kernel equals ker A.
        let a = BoundaryOperator::points_diagonal(&[1.0, 0.0, -2.0, 0.0]).unwrap();
        let d = CylinderOperator::product(&a, TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let dd = glue_double(&d, &d).unwrap();
        assert!(dd.is_time_independent());
        let idx = dd.index().unwrap();
        assert_eq!(idx.index, 0);
        assert_eq!(idx.dim_ker, 2);
        assert_eq!(idx.dim_coker, 2);
    }

    #[test]
    fn self_double_has_index_zero() {
        let slice = BoundarySlice::square(3, 1.0).unwrap();
        let cl = make_clifford(2).unwrap();
        let a0 = build_boundary_operator(&slice, &cl, &[1.0; 9], 0.0).unwrap();
        let a1 = build_boundary_operator(&slice, &cl, &[-1.0; 9], 0.0).unwrap();
        let d = CylinderOperator::interpolating(&a0, &a1, TimeGrid::new(1.0, 9).unwrap()).unwrap();
        let dd = glue_double(&d, &d).unwrap();
        let idx = dd.index().unwrap();
        assert_eq!(idx.index, 0);
        assert_eq!(idx.dim_ker, idx.dim_coker);
    }

    #[test]
    fn mismatched_ends_rejected() {
        let a = BoundaryOperator::points_diagonal(&[1.0, -1.0]).unwrap();
        let b = BoundaryOperator::points_diagonal(&[2.0, -1.0]).unwrap();
        let g = TimeGrid::new(1.0, 6).unwrap();
        let d1 = CylinderOperator::interpolating(&a, &b, g).unwrap();
        let d2 = CylinderOperator::product(&a, g).unwrap();
        assert!(matches!(glue_double(&d1, &d2), Err(Error::IncompatibleGlue(_))));
    }
}
