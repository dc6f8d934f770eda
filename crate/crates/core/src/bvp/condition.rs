use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::CliffordData;
use crate::linalg::{c, orthogonal_complement, range_basis, rank_with_tol, singular_values, C64};
use crate::spectral::{SpectralData, SpectralInterval};

/// Which end of a cylinder a condition sits on.
///
/// At the right end the boundary restriction is `-A^L`, so spectral conditions
/// built for the right end flip the spectrum internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionTag {
    /// Eigenvalues of the boundary restriction below `a`.
    Aps(f64),
    /// Eigenvalues of the boundary restriction at or below `a`.
    DualAps(f64),
    SpectralSectionKernel,
    Transmission,
    Adjoint,
    Custom,
}

/// A subspace `B` of boundary data, given by orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    basis: Mat<C64>,
    /// Orthonormal basis of `B^perp` when it comes for free (spectral conditions).
    perp: Option<Mat<C64>>,
    tag: ConditionTag,
}

impl BoundaryCondition {
    /// Span of the columns of `m`, orthonormalized with a relative rank cutoff.
    pub fn custom(m: &Mat<C64>) -> Result<Self> {
        Ok(Self {
            basis: range_basis(m.as_ref(), 1e-12)?,
            perp: None,
            tag: ConditionTag::Custom,
        })
    }

    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(basis: Mat<C64>, tag: ConditionTag) -> Result<Self> {
        let g = basis.adjoint() * &basis;
        let dev = (0..g.nrows())
            .flat_map(|i| (0..g.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - c(if i == j { 1.0 } else { 0.0 }, 0.0)).norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::InvalidOperator(format!("condition basis not orthonormal (deviation {dev:e})")));
        }
        Ok(Self { basis, perp: None, tag })
    }

    /// `{0}`, the minimal domain.
    pub fn zero(n: usize) -> Self {
        Self {
            basis: Mat::zeros(n, 0),
            perp: Some(Mat::identity(n, n)),
            tag: ConditionTag::Custom,
        }
    }

    /// The whole space, the maximal domain.
    pub fn full(n: usize) -> Self {
        Self {
            basis: Mat::identity(n, n),
            perp: Some(Mat::zeros(n, 0)),
            tag: ConditionTag::Custom,
        }
    }

    pub fn with_tag(mut self, tag: ConditionTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn tag(&self) -> &ConditionTag {
        &self.tag
    }

    pub fn basis(&self) -> &Mat<C64> {
        &self.basis
    }

    /// Dimension of the ambient space of boundary data.
    pub fn space_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn codim(&self) -> usize {
        self.space_dim() - self.dim()
    }

    /// Orthonormal basis of `B^perp`.
    pub fn complement(&self) -> Mat<C64> {
        match &self.perp {
            Some(p) => p.clone(),
            None => orthogonal_complement(self.basis.as_ref()),
        }
    }

    /// `||v - P_B v||`, zero exactly when `v` is in `B`.
    pub fn residual(&self, v: &[C64]) -> Result<f64> {
        if v.len() != self.space_dim() {
            return Err(Error::ShapeMismatch(format!("vector of length {} for space {}", v.len(), self.space_dim())));
        }
        let x = Mat::from_fn(v.len(), 1, |i, _| v[i]);
        let p = &self.basis * (self.basis.adjoint() * &x);
        Ok((0..v.len()).map(|i| (x[(i, 0)] - p[(i, 0)]).norm_sqr()).sum::<f64>().sqrt())
    }
}

fn spectral_condition(spec: &SpectralData, interval: SpectralInterval, tag: ConditionTag) -> Result<BoundaryCondition> {
    if !spec.is_complete() {
        return Err(Error::TooLarge("spectral conditions need a complete decomposition".into()));
    }
    let idx = spec.indices_in(&interval)?;
    let rest: Vec<usize> = (0..spec.dim()).filter(|j| !idx.contains(j)).collect();
    Ok(BoundaryCondition {
        basis: spec.columns(&idx),
        perp: Some(spec.columns(&rest)),
        tag,
    })
}

/// Generalized APS condition `B(a)`: eigenvectors of the boundary restriction with
/// eigenvalue `< a`.
///
/// `spec` always decomposes the operator `A` of the cylinder family at that end.
/// On the right end the restriction is `-A`, so the condition keeps `lambda(A) > -a`.
pub fn aps_condition(spec: &SpectralData, a: f64, side: Side) -> Result<BoundaryCondition> {
    let interval = match side {
        Side::Left => SpectralInterval::below(a),
        Side::Right => SpectralInterval::above(-a),
    };
    spectral_condition(spec, interval, ConditionTag::Aps(a))
}

/// Dual APS condition: eigenvalues of the boundary restriction `<= a`.
pub fn dual_aps_condition(spec: &SpectralData, a: f64, side: Side) -> Result<BoundaryCondition> {
    let interval = match side {
        Side::Left => SpectralInterval::at_or_below(a),
        Side::Right => SpectralInterval::at_or_above(-a),
    };
    spectral_condition(spec, interval, ConditionTag::DualAps(a))
}

/// Diagonal `{(u, u)}` in the doubled slice space of dimension `2n`.
pub fn transmission_condition(n: usize) -> BoundaryCondition {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    BoundaryCondition {
        basis: Mat::from_fn(2 * n, n, |i, j| c(if i % n == j { s } else { 0.0 }, 0.0)),
        perp: None,
        tag: ConditionTag::Transmission,
    }
}

fn cdt_blocks(clifford: &CliffordData, m: &Mat<C64>, signs: &[f64]) -> Result<Mat<C64>> {
    let r = clifford.rank();
    let rows = m.nrows();
    if signs.is_empty() || rows % signs.len() != 0 || (rows / signs.len()) % r != 0 {
        return Err(Error::ShapeMismatch(format!(
            "condition space of dimension {rows} does not split into {} slice copies",
            signs.len()
        )));
    }
    let n = rows / signs.len();
    Ok(Mat::from_fn(rows, m.ncols(), |i, j| {
        m[(i, j)] * c(0.0, signs[i / n] * clifford.grading_sign(i % r))
    }))
}

/// `B^ad = (c(dt) B)^perp` with the same `c(dt)` on every slice copy.
pub fn adjoint_condition(b: &BoundaryCondition, clifford: &CliffordData) -> Result<BoundaryCondition> {
    adjoint_condition_oriented(b, clifford, &[1.0])
}

/// Adjoint condition with an orientation sign per slice copy: `+1` for a left end,
/// `-1` for a right end. This is the condition under which the adjoint problem's
/// kernel is the cokernel of the original one.
pub fn adjoint_condition_oriented(
    b: &BoundaryCondition,
    clifford: &CliffordData,
    signs: &[f64],
) -> Result<BoundaryCondition> {
    let cb = cdt_blocks(clifford, &b.basis, signs)?;
    Ok(BoundaryCondition {
        basis: orthogonal_complement(cb.as_ref()),
        perp: None,
        tag: ConditionTag::Adjoint,
    })
}

/// Relative index `[X1, X2]` of two subspaces of a common space, computed as the
/// index of the orthogonal projection `X1 -> X2`.
pub fn relative_index(x1: &Mat<C64>, x2: &Mat<C64>) -> Result<i64> {
    if x1.nrows() != x2.nrows() {
        return Err(Error::ShapeMismatch("subspaces of different spaces".into()));
    }
    let p = x2.adjoint() * x1;
    let sv = singular_values(p.as_ref())?;
    let tol = x1.ncols().max(x2.ncols()).max(1) as f64 * f64::EPSILON * 16.0;
    let rank = rank_with_tol(&sv, tol);
    let ker = x1.ncols() - rank;
    let coker = x2.ncols() - rank;
    let index = ker as i64 - coker as i64;
    debug_assert_eq!(index, x1.ncols() as i64 - x2.ncols() as i64);
    Ok(index)
}
