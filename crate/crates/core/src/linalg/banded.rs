use super::{CsrMatrix, C64};
use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a square band matrix.
///
/// Storage follows the LAPACK `gbtrf` layout: column `j` keeps rows
/// `j - kl - ku ..= j + kl` contiguously, the extra `kl` rows on top absorbing
/// pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl BandedLu {
    /// Factors `matrix + shift * I` (square, any band structure).
    pub fn factor(matrix: &CsrMatrix, shift: C64) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::ShapeMismatch("banded LU needs a square matrix".into()));
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in matrix.triplets() {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n];
        for (i, j, v) in matrix.triplets() {
            ab[kv + i - j + j * ldab] += v;
        }
        for j in 0..n {
            ab[kv + j * ldab] += shift;
        }
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = -1.0;
            for p in 0..=km {
                let a = ab[kv + p + col].norm();
                if a > best {
                    best = a;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            if best == 0.0 {
                continue;
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = kv + c * ldab;
                    ab.swap(base + j - c, base + j + jp - c);
                }
            }
            if km > 0 {
                let inv = C64::new(1.0, 0.0) / ab[kv + col];
                for p in 1..=km {
                    ab[kv + p + col] *= inv;
                }
                for c in (j + 1)..=ju {
                    let base = c * ldab;
                    let u = ab[kv + j - c + base];
                    if u == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for p in 1..=km {
                        let l = ab[kv + p + col];
                        ab[kv + j + p - c + base] -= l * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
            min_pivot,
            max_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidths of the factored matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Smallest pivot modulus relative to the largest; 0 for an exactly singular matrix.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) -> Result<()> {
        let n = self.n;
        assert_eq!(b.len(), n);
        if self.min_pivot == 0.0 {
            return Err(Error::Linalg("banded LU: matrix is singular".into()));
        }
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        for j in 0..n {
            let lm = self.kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != C64::new(0.0, 0.0) {
                let col = j * ldab;
                for q in 1..=lm {
                    b[j + q] -= self.ab[kv + q + col] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab;
            b[j] /= self.ab[kv + col];
            let bj = b[j];
            if bj != C64::new(0.0, 0.0) {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= self.ab[kv + i - j + col] * bj;
                }
            }
        }
        Ok(())
    }
}

/// Counts of negative, zero and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// Inertia of the Hermitian matrix `matrix - shift * I` by Sylvester's law.
///
/// Uses a band `L D L^H` factorization without pivoting. A pivot with modulus
/// below `pivot_tol * ||A||` is reported as an error rather than counted, since
/// its sign would be unreliable; choosing a slightly different shift avoids it.
pub fn inertia(matrix: &CsrMatrix, shift: f64, pivot_tol: f64) -> Result<Inertia> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::ShapeMismatch("inertia needs a square matrix".into()));
    }
    let b = matrix.bandwidth();
    let ld = b + 1;
    // low[(i - j) + j * ld] holds entry (i, j) for 0 <= i - j <= b.
    let mut low = vec![C64::new(0.0, 0.0); ld * n];
    for (i, j, v) in matrix.triplets() {
        if i >= j {
            low[i - j + j * ld] += v;
        }
    }
    let scale = matrix.norm_inf().max(shift.abs()).max(f64::MIN_POSITIVE);
    let mut counts = Inertia {
        negative: 0,
        zero: 0,
        positive: 0,
    };
    for j in 0..n {
        let d = low[j * ld].re - shift;
        if d.abs() <= pivot_tol * scale {
            return Err(Error::Linalg(format!(
                "inertia: pivot {d:e} at row {j} below tolerance; shift {shift} is too close to the spectrum"
            )));
        }
        if d < 0.0 {
            counts.negative += 1;
        } else {
            counts.positive += 1;
        }
        let m = b.min(n - 1 - j);
        // Column j of L, scaled by 1/d; the update uses d * l_i * conj(l_k).
        for p in 1..=m {
            low[p + j * ld] /= d;
        }
        for q in 1..=m {
            let lq = low[q + j * ld];
            if lq == C64::new(0.0, 0.0) {
                continue;
            }
            let k = j + q;
            let factor = lq.conj() * d;
            for p in q..=m {
                let lp = low[p + j * ld];
                low[(p - q) + k * ld] -= lp * factor;
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermitian_eigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, b: usize, seed: u64, hermitian: bool) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(b)..(i + b + 1).min(n) {
                if hermitian && j > i {
                    continue;
                }
                let v = c(rng.gen_range(-1.0..1.0), if i == j && hermitian { 0.0 } else { rng.gen_range(-1.0..1.0) });
                t.push((i, j, v));
                if hermitian && i != j {
                    t.push((j, i, v.conj()));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn banded_solve_matches_dense_residual() {
        for seed in 0..5 {
            let a = random_band(40, 3, seed, false);
            let lu = BandedLu::factor(&a, c(0.0, 0.0)).unwrap();
            let x_true: Vec<C64> = (0..40).map(|k| c(k as f64 * 0.1, 1.0 - k as f64 * 0.05)).collect();
            let mut b = vec![c(0.0, 0.0); 40];
            a.matvec(&x_true, &mut b);
            lu.solve_in_place(&mut b).unwrap();
            let err = b.iter().zip(&x_true).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "seed {seed}: {err}");
        }
    }

    #[test]
    fn banded_solve_needs_pivoting() {
        // Zero leading entry forces a row swap.
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 1, c(1.0, 0.0)),
                (1, 0, c(1.0, 0.0)),
                (1, 2, c(2.0, 0.0)),
                (2, 1, c(2.0, 0.0)),
                (2, 2, c(1.0, 0.0)),
            ],
        )
        .unwrap();
        let lu = BandedLu::factor(&a, c(0.0, 0.0)).unwrap();
        let mut b = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let orig = b.clone();
        lu.solve_in_place(&mut b).unwrap();
        let mut r = vec![c(0.0, 0.0); 3];
        a.matvec(&b, &mut r);
        assert!(r.iter().zip(&orig).all(|(u, v)| (u - v).norm() < 1e-14));
    }

    #[test]
    fn singular_matrix_detected() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0, 0.0))]).unwrap();
        let lu = BandedLu::factor(&a, c(0.0, 0.0)).unwrap();
        assert_eq!(lu.pivot_ratio(), 0.0);
        assert!(lu.solve_in_place(&mut [c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn inertia_matches_dense_eigenvalues() {
        for seed in 0..8 {
            let a = random_band(30, 4, 100 + seed, true);
            let (vals, _) = hermitian_eigen(a.to_dense().as_ref()).unwrap();
            for shift in [-0.7, 0.0, 0.3] {
                if vals.iter().any(|v| (v - shift).abs() < 1e-6) {
                    continue;
                }
                let Ok(inr) = inertia(&a, shift, 1e-13) else { continue };
                let neg = vals.iter().filter(|&&v| v < shift).count();
                assert_eq!(inr.negative, neg, "seed {seed} shift {shift}");
                assert_eq!(inr.positive, 30 - neg);
            }
        }
    }
}
