use faer::{Mat, MatRef, Side};

use super::C64;
use crate::error::{Error, Result};

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
///
/// Only the lower triangle is read.
pub fn hermitian_eigen(m: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("dense Hermitian eigensolver: {e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
    let vectors = evd.U().to_owned();
    // faer sorts ascending; keep the guarantee local in case that ever changes.
    if values.windows(2).all(|w| w[0] <= w[1]) {
        return Ok((values, vectors));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = order.iter().map(|&k| values[k]).collect();
    let vecs = Mat::from_fn(vectors.nrows(), order.len(), |i, j| vectors[(i, order[j])]);
    Ok((sorted, vecs))
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values()
        .map_err(|e| Error::NoConvergence(format!("singular values: {e:?}")))
}

/// Thin SVD `m = U diag(s) V^H`, singular values nonincreasing.
pub fn svd_thin(m: MatRef<'_, C64>) -> Result<(Mat<C64>, Vec<f64>, Mat<C64>)> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::NoConvergence(format!("thin SVD: {e:?}")))?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((svd.U().to_owned(), s, svd.V().to_owned()))
}

/// Number of singular values strictly above `tol`.
pub fn rank_with_tol(sv: &[f64], tol: f64) -> usize {
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis for the column span of a full-column-rank matrix (thin QR).
pub fn orthonormalize(m: MatRef<'_, C64>) -> Mat<C64> {
    if m.ncols() == 0 {
        return Mat::zeros(m.nrows(), 0);
    }
    m.qr().compute_thin_Q()
}

/// Orthonormal basis of the orthogonal complement of the span of the orthonormal
/// columns `q`.
///
/// Householder QR of `[q | I]`: the first `q.ncols()` columns of the unitary factor
/// span `q`, the remaining ones its complement.
pub fn orthogonal_complement(q: MatRef<'_, C64>) -> Mat<C64> {
    let (n, d) = (q.nrows(), q.ncols());
    if d == 0 {
        return Mat::identity(n, n);
    }
    if d >= n {
        return Mat::zeros(n, 0);
    }
    let aug = Mat::from_fn(n, d + n, |i, j| {
        if j < d {
            q[(i, j)]
        } else if i == j - d {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let full = aug.qr().compute_thin_Q();
    full.subcols(d, n - d).to_owned()
}

/// Orthonormal basis of the column span of `m`, dropping directions with singular
/// value at most `rel_tol * sigma_max`.
pub fn range_basis(m: MatRef<'_, C64>, rel_tol: f64) -> Result<Mat<C64>> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(Mat::zeros(m.nrows(), 0));
    }
    let (u, s, _) = svd_thin(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let r = rank_with_tol(&s, rel_tol * smax);
    Ok(u.subcols(0, r).to_owned())
}

/// Sines of the principal angles between the spans of two orthonormal bases of
/// equal dimension, in nondecreasing order.
///
/// Computed as the singular values of `(I - Qb Qb^H) Qa`, which stay accurate for
/// small angles where cosines lose precision.
pub fn principal_angle_sines(qa: MatRef<'_, C64>, qb: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if qa.nrows() != qb.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "bases live in dimensions {} and {}",
            qa.nrows(),
            qb.nrows()
        )));
    }
    let proj = qb * (qb.adjoint() * qa);
    let resid = qa - proj;
    let mut sv = singular_values(resid.as_ref())?;
    sv.reverse();
    Ok(sv)
}

/// Dimension of `span(qa) ∩ span(qb)` given an orthonormal basis `qb_perp` of the
/// complement of `qb`: `dim span(qa) - rank(qb_perp^H qa)`.
///
/// Returns the dimension together with the singular values that decided it.
pub fn subspace_intersection_dim(
    qa: MatRef<'_, C64>,
    qb_perp: MatRef<'_, C64>,
    tol: f64,
) -> Result<(usize, Vec<f64>)> {
    if qa.ncols() == 0 {
        return Ok((0, Vec::new()));
    }
    if qb_perp.ncols() == 0 {
        return Ok((qa.ncols(), Vec::new()));
    }
    let m = qb_perp.adjoint() * qa;
    let sv = singular_values(m.as_ref())?;
    Ok((qa.ncols() - rank_with_tol(&sv, tol), sv))
}

/// Largest entry modulus.
pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

/// Largest entry of `|m - m^H|`.
pub fn hermitian_part_deviation(m: MatRef<'_, C64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            out = out.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn eigen_of_small_hermitian() {
        let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(2.0, 0.0),
            (0, 1) => c(0.0, -1.0),
            _ => c(0.0, 1.0),
        });
        let (vals, vecs) = hermitian_eigen(m.as_ref()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let resid = &m * &vecs - &vecs * Mat::from_fn(2, 2, |i, j| if i == j { c(vals[i], 0.0) } else { c(0.0, 0.0) });
        assert!(max_abs(resid.as_ref()) < 1e-14);
    }

    #[test]
    fn intersection_of_coordinate_planes() {
        let e = |k: usize| Mat::from_fn(3, 1, move |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let mut qa = Mat::zeros(3, 2);
        qa.col_mut(0).copy_from(e(0).col(0));
        qa.col_mut(1).copy_from(e(1).col(0));
        // span(e1, e2) ∩ span(e2, e3): complement of the second is e1.
        let (dim, _) = subspace_intersection_dim(qa.as_ref(), e(0).as_ref(), 1e-12).unwrap();
        assert_eq!(dim, 1);
        let sines = principal_angle_sines(qa.as_ref(), qa.as_ref()).unwrap();
        assert!(sines.iter().all(|&s| s < 1e-14));
    }

    #[test]
    fn rank_counts_above_tolerance() {
        assert_eq!(rank_with_tol(&[3.0, 1.0, 1e-17], 1e-12), 2);
        assert_eq!(rank_with_tol(&[], 1e-12), 0);
    }
}
