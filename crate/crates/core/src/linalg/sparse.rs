use faer::Mat;

use super::C64;
use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices and no stored zeros.
///
/// The canonical form makes structural equality coincide with matrix equality.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let triplets = diag.iter().enumerate().map(|(i, &v)| (i, i, v));
        Self::from_triplets(diag.len(), diag.len(), triplets).expect("diagonal entries are in range")
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::ShapeMismatch(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = row[k].1;
                k += 1;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                if v != C64::new(0.0, 0.0) {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Dense matrix converted to CSR, dropping exact zeros.
    pub fn from_dense(m: &Mat<C64>) -> Self {
        let triplets = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_triplets(m.nrows(), m.ncols(), triplets).expect("indices come from the matrix")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    /// `self * m` for a dense right-hand side.
    pub fn mul_dense(&self, m: &Mat<C64>) -> Mat<C64> {
        assert_eq!(m.nrows(), self.ncols);
        let mut out = Mat::<C64>::zeros(self.nrows, m.ncols());
        for j in 0..m.ncols() {
            let x = m.col_as_slice(j);
            let y = out.col_as_slice_mut(j);
            self.matvec(x, y);
        }
        out
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut out = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
            .expect("transposed indices are in range")
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: C64, other: &Self, beta: C64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let a = self.triplets().map(|(i, j, v)| (i, j, alpha * v));
        let b = other.triplets().map(|(i, j, v)| (i, j, beta * v));
        Self::from_triplets(self.nrows, self.ncols, a.chain(b))
    }

    /// `(1 - s) self + s other`, reproducing entries on which both agree exactly.
    pub fn interpolate(&self, other: &Self, s: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut t = Vec::with_capacity(self.nnz().max(other.nnz()));
        for i in 0..self.nrows {
            let (mut a, mut b) = (self.row(i).peekable(), other.row(i).peekable());
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ja, va)), Some((jb, vb))) if ja == jb => {
                        t.push((i, ja, if va == vb { va } else { va * (1.0 - s) + vb * s }));
                        a.next();
                        b.next();
                    }
                    (Some((ja, va)), Some((jb, _))) if ja < jb => {
                        t.push((i, ja, va * (1.0 - s)));
                        a.next();
                    }
                    (Some((ja, va)), None) => {
                        t.push((i, ja, va * (1.0 - s)));
                        a.next();
                    }
                    (_, Some((jb, vb))) => {
                        t.push((i, jb, vb * s));
                        b.next();
                    }
                }
            }
        }
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        self.lin_comb(one, other, one)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        self.lin_comb(one, other, -one)
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(i, j, v)| (i, j, alpha * v)))
            .expect("same pattern")
    }

    /// Matrix product of two sparse matrices.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut triplets = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    triplets.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Largest entry of `|M - M^H|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for (i, j, v) in self.triplets() {
            dev = dev.max((v - self.get(j, i).conj()).norm());
        }
        dev
    }

    /// Maximum absolute row sum; bounds the spectral norm of a Hermitian matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest stored entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Appends a canonical byte encoding (shape, pattern, IEEE bits) to `out`.
    pub fn write_canonical_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.nrows as u64).to_le_bytes());
        out.extend_from_slice(&(self.ncols as u64).to_le_bytes());
        for &p in &self.row_ptr {
            out.extend_from_slice(&(p as u64).to_le_bytes());
        }
        for &c in &self.cols {
            out.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for v in &self.vals {
            out.extend_from_slice(&v.re.to_bits().to_le_bytes());
            out.extend_from_slice(&v.im.to_bits().to_le_bytes());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn interpolation_keeps_shared_entries() {
        let a = CsrMatrix::from_triplets(2, 3, [(0, 0, c(0.1, 0.0)), (0, 2, c(0.7, 0.3)), (1, 1, c(2.0, 0.0))]).unwrap();
        let b = CsrMatrix::from_triplets(2, 3, [(0, 0, c(0.1, 0.0)), (1, 0, c(-1.0, 0.0)), (1, 1, c(4.0, 0.0))]).unwrap();
        for s in [0.1, 0.37, 0.9] {
            let m = a.interpolate(&b, s).unwrap();
            assert_eq!(m.get(0, 0), c(0.1, 0.0));
            assert_eq!(m.get(0, 2), c(0.7, 0.3) * (1.0 - s));
            assert_eq!(m.get(1, 0), c(-s, 0.0));
            assert!((m.get(1, 1) - c(2.0 + 2.0 * s, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(2.0, 1.0)), (1, 0, c(1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), c(3.0, 1.0));
        assert_eq!(m.get(0, 1), c(0.0, 0.0));
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn adjoint_and_products_match_dense() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 1, c(1.0, 2.0)), (2, 0, c(-1.0, 0.5)), (1, 1, c(3.0, 0.0))],
        )
        .unwrap();
        let d = m.to_dense();
        let ad = m.adjoint().to_dense();
        assert_eq!(ad, d.adjoint().to_owned());
        let prod = m.matmul(&m.adjoint()).unwrap().to_dense();
        let expected = &d * d.adjoint();
        assert!(crate::linalg::max_abs((prod - expected).as_ref()) < 1e-14);
        assert_eq!(m.bandwidth(), 2);
        assert!(m.matmul(&m.adjoint()).unwrap().hermitian_deviation() < 1e-14);
    }

    #[test]
    fn canonical_bytes_distinguish_values() {
        let a = CsrMatrix::identity(3);
        let b = a.scale(c(1.0 + 1e-16 * 3.0, 0.0));
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_canonical_bytes(&mut x);
        b.write_canonical_bytes(&mut y);
        assert_eq!(x.len(), y.len());
        assert_eq!(a == b, x == y);
    }
}
