use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hermitian_eigen, BandedLu, CsrMatrix, C64};
use crate::error::{Error, Result};

/// Settings for [`shift_invert_eigs`].
#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Block size; must be at least the largest multiplicity to be resolved.
    pub block: usize,
    /// Residual tolerance relative to `max(1, |lambda|)`.
    pub tol: f64,
    /// Upper bound on the Krylov subspace dimension.
    pub max_dim: usize,
    /// Seed of the deterministic starting block.
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            block: 4,
            tol: 1e-9,
            max_dim: 800,
            seed: 0x5eed,
        }
    }
}

/// The `count` eigenpairs of a Hermitian matrix closest to `shift`.
///
/// Block Krylov iteration on `(A - shift)^{-1}` with full reorthogonalization and
/// Rayleigh-Ritz extraction. Converged pairs satisfy
/// `||A x - lambda x|| <= tol * max(1, |lambda|)`. Results are sorted by eigenvalue.
pub fn shift_invert_eigs(
    matrix: &CsrMatrix,
    shift: f64,
    count: usize,
    opts: KrylovOptions,
) -> Result<(Vec<f64>, Mat<C64>, Vec<f64>)> {
    let n = matrix.nrows();
    if count == 0 {
        return Ok((Vec::new(), Mat::zeros(n, 0), Vec::new()));
    }
    if count > n {
        return Err(Error::ShapeMismatch(format!("asked for {count} eigenpairs of a {n}x{n} matrix")));
    }
    let lu = BandedLu::factor(matrix, C64::new(-shift, 0.0))?;
    if lu.pivot_ratio() < 1e-14 {
        return Err(Error::Linalg(format!(
            "shift {shift} is (numerically) an eigenvalue; pivot ratio {:e}",
            lu.pivot_ratio()
        )));
    }
    let block = opts.block.max(1).min(n);
    let max_dim = opts.max_dim.max(count + 2 * block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut images: Vec<Vec<C64>> = Vec::new();
    let mut pending: Vec<Vec<C64>> = (0..block)
        .map(|_| (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    let mut last_residuals = Vec::new();
    let mut check_at = (count + 2 * block).max(4 * block).min(max_dim);
    loop {
        for mut v in pending.drain(..) {
            if !orthogonalize(&mut v, &basis) {
                continue;
            }
            let mut w = v.clone();
            lu.solve_in_place(&mut w)?;
            basis.push(v);
            images.push(w);
        }
        let stalled = images.is_empty();
        if basis.len() >= check_at || basis.len() >= max_dim || stalled {
            if let Some(out) = rayleigh_ritz(matrix, shift, count, &basis, &images, opts.tol, &mut last_residuals)? {
                return Ok(out);
            }
            if basis.len() >= max_dim || basis.len() == n {
                return Err(Error::NoConvergence(format!(
                    "shift-invert Krylov: subspace dimension {} reached with residuals {:?}",
                    basis.len(),
                    last_residuals
                )));
            }
            check_at = (check_at * 3 / 2).max(check_at + block).min(max_dim);
        }
        let start = images.len().saturating_sub(block);
        pending = images[start..].to_vec();
        if pending.is_empty() {
            return Err(Error::NoConvergence("shift-invert Krylov: empty subspace".into()));
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Two passes of classical Gram-Schmidt; returns false if `v` is (numerically) in the span.
fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) -> bool {
    let before = norm(v);
    if before == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for q in basis {
            let p = dot(q, v);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= p * y;
            }
        }
    }
    let after = norm(v);
    if after <= 1e-10 * before {
        return false;
    }
    for x in v.iter_mut() {
        *x /= after;
    }
    true
}

#[allow(clippy::type_complexity)]
fn rayleigh_ritz(
    matrix: &CsrMatrix,
    shift: f64,
    count: usize,
    basis: &[Vec<C64>],
    images: &[Vec<C64>],
    tol: f64,
    residuals_out: &mut Vec<f64>,
) -> Result<Option<(Vec<f64>, Mat<C64>, Vec<f64>)>> {
    let m = basis.len();
    let n = matrix.nrows();
    let h = Mat::<C64>::from_fn(m, m, |i, j| {
        let a = dot(&basis[i], &images[j]);
        let b = dot(&basis[j], &images[i]).conj();
        (a + b) * 0.5
    });
    let (theta, s) = hermitian_eigen(h.as_ref())?;
    // Largest |theta| of the inverse are the eigenvalues nearest the shift.
    let mut order: Vec<usize> = (0..m).filter(|&k| theta[k] != 0.0).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    if order.len() < count {
        return Ok(None);
    }
    let mut picked: Vec<(f64, Vec<C64>, f64)> = Vec::with_capacity(count);
    let mut ax = vec![C64::new(0.0, 0.0); n];
    for &k in order.iter().take(count) {
        let lambda = shift + 1.0 / theta[k];
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (j, q) in basis.iter().enumerate() {
            let coef = s[(j, k)];
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += coef * qi;
            }
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        matrix.matvec(&x, &mut ax);
        let r = ax.iter().zip(&x).map(|(a, v)| (a - v * lambda).norm_sqr()).sum::<f64>().sqrt();
        picked.push((lambda, x, r));
    }
    *residuals_out = picked.iter().map(|p| p.2).collect();
    if picked.iter().any(|(l, _, r)| *r > tol * l.abs().max(1.0)) {
        return Ok(None);
    }
    picked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = picked.iter().map(|p| p.0).collect();
    let residuals = picked.iter().map(|p| p.2).collect();
    let vectors = Mat::from_fn(n, count, |i, j| picked[j].1[i]);
    Ok(Some((values, vectors, residuals)))
}
