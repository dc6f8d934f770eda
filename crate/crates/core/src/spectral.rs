//! Eigendecomposition of boundary operators and the finite-dimensional shadows
//! of spectral projections, Sobolev and hybrid norms, the boundary pairing, the
//! extension map and the trace bound.

use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{CliffordData, TimeGrid};
use crate::linalg::{c, hermitian_eigen, inertia, shift_invert_eigs, KrylovOptions, C64};
use crate::ops::{plateau, BoundaryOperator, CylinderOperator};

/// Largest dimension decomposed densely by default.
pub const DENSE_LIMIT: usize = 4000;

/// Relative kernel threshold: `|lambda| <= ZERO_TOL_REL * max |lambda|` counts as zero.
pub const ZERO_TOL_REL: f64 = 1e-8;

/// Describes a partial decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWindow {
    /// Every eigenvalue with `|lambda| <= radius` is among the computed pairs.
    pub radius: f64,
    /// Number of eigenvalues `< -radius`, from an inertia count; `None` if the
    /// factorization hit a tiny pivot.
    pub below: Option<usize>,
}

/// Eigenpairs of a boundary operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    label: String,
    dim: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<C64>,
    residuals: Vec<f64>,
    zero_tol: f64,
    window: Option<SpectralWindow>,
}

impl PartialEq for SpectralData {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.dim == other.dim
            && self.eigenvalues == other.eigenvalues
            && self.residuals == other.residuals
            && self.zero_tol == other.zero_tol
            && self.window == other.window
            && self.eigenvectors == other.eigenvectors
    }
}

fn residuals(op: &BoundaryOperator, values: &[f64], vectors: &Mat<C64>) -> Vec<f64> {
    let n = op.dim();
    let mut av = vec![C64::new(0.0, 0.0); n];
    (0..values.len())
        .map(|j| {
            let u = vectors.col_as_slice(j);
            op.matrix().matvec(u, &mut av);
            av.iter().zip(u).map(|(a, x)| (a - x * values[j]).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect()
}

fn check_residuals(values: &[f64], res: &[f64]) -> Result<()> {
    for (j, (&l, &r)) in values.iter().zip(res).enumerate() {
        if r > 1e-9 * l.abs().max(1.0) {
            return Err(Error::NoConvergence(format!(
                "eigenpair {j} (lambda = {l:e}) has residual {r:e}"
            )));
        }
    }
    Ok(())
}

/// Full dense eigendecomposition.
pub fn eigendecompose(op: &BoundaryOperator) -> Result<SpectralData> {
    if op.dim() > DENSE_LIMIT {
        return Err(Error::TooLarge(format!(
            "dense decomposition of dimension {} exceeds {DENSE_LIMIT}; use a window",
            op.dim()
        )));
    }
    let (values, vectors) = hermitian_eigen(op.to_dense().as_ref())?;
    let res = residuals(op, &values, &vectors);
    check_residuals(&values, &res)?;
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SpectralData {
        label: op.label().to_string(),
        dim: op.dim(),
        eigenvalues: values,
        eigenvectors: vectors,
        residuals: res,
        zero_tol: ZERO_TOL_REL * max,
        window: None,
    })
}

/// Partial decomposition covering at least the `count` smallest `|lambda|`.
///
/// Shift-invert block Krylov around a small offset from zero (zero itself is
/// usually an eigenvalue). The window radius is certified by inertia: the number
/// of eigenvalues in `(-radius, radius)` from two `L D L^H` counts must equal the
/// number of computed pairs inside. Eigenvalues below the window are counted the
/// same way.
pub fn eigendecompose_window(op: &BoundaryOperator, count: usize, opts: KrylovOptions) -> Result<SpectralData> {
    let n = op.dim();
    let count = count.min(n);
    let bound = op.norm_bound().max(f64::MIN_POSITIVE);
    let shift = 1e-3 * bound / (n as f64).sqrt();
    let mut want = (2 * count + 4).min(n);
    loop {
        let (values, vectors, res) = shift_invert_eigs(op.matrix(), shift, want, opts)?;
        let mut levels: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        levels.sort_by(f64::total_cmp);
        // Candidate radii halfway between consecutive |lambda| levels, largest first.
        for i in (0..levels.len()).rev() {
            let radius = if i + 1 < levels.len() {
                0.5 * (levels[i] + levels[i + 1])
            } else if want == n {
                f64::INFINITY
            } else {
                continue;
            };
            if levels[i + 1..].first().is_some_and(|&next| next - levels[i] < 1e-9 * bound) {
                continue;
            }
            let keep: Vec<usize> = (0..values.len()).filter(|&j| values[j].abs() < radius).collect();
            if keep.len() < count {
                break;
            }
            let (below, certified) = if radius.is_finite() {
                let lo = inertia(op.matrix(), -radius, 1e-13);
                let hi = inertia(op.matrix(), radius, 1e-13);
                match (lo, hi) {
                    (Ok(lo), Ok(hi)) => (Some(lo.negative), hi.negative - lo.negative == keep.len()),
                    _ => (None, false),
                }
            } else {
                (Some(0), true)
            };
            if !certified {
                continue;
            }
            let vals: Vec<f64> = keep.iter().map(|&j| values[j]).collect();
            let vecs = Mat::from_fn(n, keep.len(), |r, k| vectors[(r, keep[k])]);
            let rs: Vec<f64> = keep.iter().map(|&j| res[j]).collect();
            check_residuals(&vals, &rs)?;
            return Ok(SpectralData {
                label: op.label().to_string(),
                dim: n,
                eigenvalues: vals,
                eigenvectors: vecs,
                residuals: rs,
                zero_tol: ZERO_TOL_REL * bound,
                window: Some(SpectralWindow { radius, below }),
            });
        }
        if want == n {
            return Err(Error::NoConvergence("could not certify a spectral window".into()));
        }
        want = (want * 2).min(n);
    }
}

/// Source of spectral data; the CLI injects a caching implementation.
pub trait Eigensolver: Send + Sync {
    fn decompose(&self, op: &BoundaryOperator) -> Result<Arc<SpectralData>>;
}

/// Uncached dense decomposition.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseEigensolver;

impl Eigensolver for DenseEigensolver {
    fn decompose(&self, op: &BoundaryOperator) -> Result<Arc<SpectralData>> {
        eigendecompose(op).map(Arc::new)
    }
}

/// An interval of the real line with explicit endpoint conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl SpectralInterval {
    pub fn new(lower: f64, upper: f64, lower_closed: bool, upper_closed: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidOperator(format!("invalid interval bounds {lower}, {upper}")));
        }
        Ok(Self {
            lower,
            upper,
            lower_closed: lower_closed && lower.is_finite(),
            upper_closed: upper_closed && upper.is_finite(),
        })
    }

    pub fn all() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY, false, false).unwrap()
    }

    /// `(-inf, a)`.
    pub fn below(a: f64) -> Self {
        Self::new(f64::NEG_INFINITY, a, false, false).unwrap()
    }

    /// `(-inf, a]`.
    pub fn at_or_below(a: f64) -> Self {
        Self::new(f64::NEG_INFINITY, a, false, true).unwrap()
    }

    /// `(a, inf)`.
    pub fn above(a: f64) -> Self {
        Self::new(a, f64::INFINITY, false, false).unwrap()
    }

    /// `[a, inf)`.
    pub fn at_or_above(a: f64) -> Self {
        Self::new(a, f64::INFINITY, true, false).unwrap()
    }

    /// `[a, b)`.
    pub fn half_open(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, true, false)
    }
}

impl SpectralData {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<C64> {
        &self.eigenvectors
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn window(&self) -> Option<&SpectralWindow> {
        self.window.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.window.is_none()
    }

    /// Overrides the kernel threshold.
    pub fn with_zero_tol(mut self, tol: f64) -> Self {
        self.zero_tol = tol;
        self
    }

    /// Number of eigenvalues with `|lambda| <= zero_tol`.
    pub fn kernel_dim(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() <= self.zero_tol).count()
    }

    /// Number of eigenvalues below zero, kernel excluded.
    pub fn negative_count(&self) -> Result<usize> {
        let inside = self.eigenvalues.iter().filter(|&&l| l < -self.zero_tol).count();
        match &self.window {
            None => Ok(inside),
            Some(w) => w
                .below
                .map(|b| b + inside)
                .ok_or_else(|| Error::Linalg("inertia count below the window unavailable".into())),
        }
    }

    fn safe_cut_near(&self, cut: f64, lambda: f64) -> f64 {
        let above = self.eigenvalues.iter().copied().find(|&l| l > lambda + self.zero_tol);
        let below = self.eigenvalues.iter().rev().copied().find(|&l| l < lambda - self.zero_tol);
        let up = above.map(|l| 0.5 * (lambda + l)).unwrap_or(lambda + 1.0);
        let down = below.map(|l| 0.5 * (lambda + l)).unwrap_or(lambda - 1.0);
        if (up - cut).abs() <= (down - cut).abs() {
            up
        } else {
            down
        }
    }

    fn endpoint_side(&self, lambda: f64, e: f64) -> Result<std::cmp::Ordering> {
        use std::cmp::Ordering;
        if e.is_infinite() {
            return Ok(if e > 0.0 { Ordering::Less } else { Ordering::Greater });
        }
        if e == 0.0 {
            if lambda.abs() <= self.zero_tol {
                return Ok(Ordering::Equal);
            }
            return Ok(if lambda < 0.0 { Ordering::Less } else { Ordering::Greater });
        }
        if (lambda - e).abs() <= self.zero_tol {
            return Err(Error::EigenvalueCollision {
                cut: e,
                eigenvalue: lambda,
                suggestion: self.safe_cut_near(e, lambda),
            });
        }
        Ok(if lambda < e { Ordering::Less } else { Ordering::Greater })
    }

    /// Whether `lambda` lies in `interval`, following the collision rules: at a
    /// zero endpoint kernel eigenvalues count as exactly zero; any other endpoint
    /// within `zero_tol` of `lambda` is an error.
    pub fn contains(&self, interval: &SpectralInterval, lambda: f64) -> Result<bool> {
        use std::cmp::Ordering::*;
        let lo = match self.endpoint_side(lambda, interval.lower)? {
            Greater => true,
            Equal => interval.lower_closed,
            Less => false,
        };
        let hi = match self.endpoint_side(lambda, interval.upper)? {
            Less => true,
            Equal => interval.upper_closed,
            Greater => false,
        };
        Ok(lo && hi)
    }

    /// Indices `j` with `lambda_j` in `interval`.
    pub fn indices_in(&self, interval: &SpectralInterval) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            if self.contains(interval, l)? {
                out.push(j);
            }
        }
        Ok(out)
    }

    /// Number of eigenvalues in `interval`. For a window decomposition the
    /// interval must lie inside the window, or be `(-inf, a)`/`(-inf, a]` with `a`
    /// inside it.
    pub fn count_in(&self, interval: &SpectralInterval) -> Result<usize> {
        let inside = self.indices_in(interval)?.len();
        let Some(w) = &self.window else {
            return Ok(inside);
        };
        let within = |x: f64| x.abs() < w.radius;
        if within(interval.lower) && within(interval.upper) {
            return Ok(inside);
        }
        if interval.lower == f64::NEG_INFINITY && within(interval.upper) {
            return w
                .below
                .map(|b| b + inside)
                .ok_or_else(|| Error::Linalg("inertia count below the window unavailable".into()));
        }
        Err(Error::TooLarge(format!(
            "interval [{}, {}] leaves the decomposed window of radius {}",
            interval.lower, interval.upper, w.radius
        )))
    }

    /// Columns of the eigenvectors selected by `idx`.
    pub fn columns(&self, idx: &[usize]) -> Mat<C64> {
        Mat::from_fn(self.dim, idx.len(), |i, k| self.eigenvectors[(i, idx[k])])
    }

    /// Eigen-coefficients `a_j = <u_j, u>`.
    pub fn coefficients(&self, u: &[C64]) -> Result<Vec<C64>> {
        if u.len() != self.dim {
            return Err(Error::ShapeMismatch(format!("vector of length {} for dimension {}", u.len(), self.dim)));
        }
        Ok((0..self.eigenvalues.len())
            .map(|j| {
                self.eigenvectors
                    .col_as_slice(j)
                    .iter()
                    .zip(u)
                    .map(|(a, b)| a.conj() * b)
                    .sum()
            })
            .collect())
    }

    /// Writes a versioned little-endian encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"SPEC0001");
        let put_u64 = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        let put_f64 = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());
        put_u64(&mut out, self.label.len() as u64);
        out.extend_from_slice(self.label.as_bytes());
        put_u64(&mut out, self.dim as u64);
        put_u64(&mut out, self.eigenvalues.len() as u64);
        put_f64(&mut out, self.zero_tol);
        match &self.window {
            None => put_u64(&mut out, 0),
            Some(w) => {
                put_u64(&mut out, 1);
                put_f64(&mut out, w.radius);
                put_u64(&mut out, w.below.map(|b| b as u64 + 1).unwrap_or(0));
            }
        }
        for &v in &self.eigenvalues {
            put_f64(&mut out, v);
        }
        for &v in &self.residuals {
            put_f64(&mut out, v);
        }
        for j in 0..self.eigenvalues.len() {
            for z in self.eigenvectors.col_as_slice(j) {
                put_f64(&mut out, z.re);
                put_f64(&mut out, z.im);
            }
        }
        out
    }

    /// Inverse of [`SpectralData::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Linalg("malformed spectral data encoding".into());
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != b"SPEC0001" {
            return Err(bad());
        }
        let label_len = r.u64()? as usize;
        let label = String::from_utf8(r.take(label_len)?.to_vec()).map_err(|_| bad())?;
        let dim = r.u64()? as usize;
        let m = r.u64()? as usize;
        if m > dim || dim.checked_mul(m).map_or(true, |x| x > bytes.len()) {
            return Err(bad());
        }
        let zero_tol = r.f64()?;
        let window = match r.u64()? {
            0 => None,
            1 => {
                let radius = r.f64()?;
                let below = match r.u64()? {
                    0 => None,
                    b => Some(b as usize - 1),
                };
                Some(SpectralWindow { radius, below })
            }
            _ => return Err(bad()),
        };
        let eigenvalues = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let residuals = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mut eigenvectors = Mat::<C64>::zeros(dim, m);
        for j in 0..m {
            for i in 0..dim {
                let re = r.f64()?;
                let im = r.f64()?;
                eigenvectors[(i, j)] = c(re, im);
            }
        }
        if r.pos != bytes.len() {
            return Err(bad());
        }
        Ok(Self {
            label,
            dim,
            eigenvalues,
            eigenvectors,
            residuals,
            zero_tol,
            window,
        })
    }
}

/// Orthonormal basis of the image of the spectral projection onto `interval`.
pub fn spectral_projection(spec: &SpectralData, interval: &SpectralInterval) -> Result<Mat<C64>> {
    if let Some(w) = spec.window() {
        let inside = |x: f64| x.is_finite() && x.abs() < w.radius;
        if !(inside(interval.lower) && inside(interval.upper)) {
            return Err(Error::TooLarge(format!(
                "projection onto an interval leaving the decomposed window of radius {}",
                w.radius
            )));
        }
    }
    Ok(spec.columns(&spec.indices_in(interval)?))
}

/// `(sum_j |a_j|^2 (1 + lambda_j^2)^s)^{1/2}` over the decomposed modes.
pub fn sobolev_norm(spec: &SpectralData, u: &[C64], s: f64) -> Result<f64> {
    let a = spec.coefficients(u)?;
    Ok(a.iter()
        .zip(spec.eigenvalues())
        .map(|(x, l)| x.norm_sqr() * (1.0 + l * l).powf(s))
        .sum::<f64>()
        .sqrt())
}

/// Norms in the two hybrid spaces at cut `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridNorms {
    /// `H^{1/2}` on `(-inf, a]`, `H^{-1/2}` on `(a, inf)`.
    pub check: f64,
    /// `H^{-1/2}` on `(-inf, a)`, `H^{1/2}` on `[a, inf)`; equals the check norm of `-A` at `-a`.
    pub hat: f64,
}

pub fn hybrid_norms(spec: &SpectralData, u: &[C64], a: f64) -> Result<HybridNorms> {
    let coef = spec.coefficients(u)?;
    let low_closed = SpectralInterval::at_or_below(a);
    let low_open = SpectralInterval::below(a);
    let (mut check, mut hat) = (0.0, 0.0);
    for (x, &l) in coef.iter().zip(spec.eigenvalues()) {
        let w = (1.0 + l * l).sqrt();
        let m = x.norm_sqr();
        check += if spec.contains(&low_closed, l)? { m * w } else { m / w };
        hat += if spec.contains(&low_open, l)? { m / w } else { m * w };
    }
    Ok(HybridNorms {
        check: check.sqrt(),
        hat: hat.sqrt(),
    })
}

fn apply_cdt(clifford: &CliffordData, v: &[C64]) -> Vec<C64> {
    let r = clifford.rank();
    v.iter()
        .enumerate()
        .map(|(i, &x)| x * c(0.0, clifford.grading_sign(i % r)))
        .collect()
}

/// The boundary pairing `beta(u, v) = -<c(dt) u, v>`, antilinear in `u`.
pub fn duality_pairing(clifford: &CliffordData, u: &[C64], v: &[C64]) -> Result<C64> {
    if u.len() != v.len() || u.len() % clifford.rank() != 0 {
        return Err(Error::ShapeMismatch(format!("pairing vectors of lengths {} and {}", u.len(), v.len())));
    }
    let cu = apply_cdt(clifford, u);
    Ok(-cu.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>())
}

/// Gram matrix `beta(u_j, w_k)` between the eigenbases of `A` and `A#`.
pub fn pairing_gram(spec: &SpectralData, sharp: &SpectralData, clifford: &CliffordData) -> Result<Mat<C64>> {
    let (m, k) = (spec.eigenvalues().len(), sharp.eigenvalues().len());
    let mut g = Mat::zeros(m, k);
    for j in 0..m {
        let u = spec.eigenvectors().col_as_slice(j);
        for l in 0..k {
            g[(j, l)] = duality_pairing(clifford, u, sharp.eigenvectors().col_as_slice(l))?;
        }
    }
    Ok(g)
}

/// Cutoff equal to 1 on `[0, r/3]` and 0 on `[2r/3, r]`.
pub fn extension_cutoff(t: f64, r: f64) -> f64 {
    1.0 - plateau(t / r)
}

/// `(E u)(t_k) = chi(t_k) sum_j a_j exp(-t_k |lambda_j|) u_j` at the nodes of `grid`,
/// with the cutoff scaled to the grid length.
pub fn extension_map(spec: &SpectralData, u: &[C64], grid: &TimeGrid) -> Result<Vec<Vec<C64>>> {
    let a = spec.coefficients(u)?;
    let n = spec.dim();
    let l = grid.length();
    Ok(grid
        .nodes()
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            if k == 0 {
                // chi(0) = 1 and the trace must return u itself, including any
                // component outside a partial window.
                return u.to_vec();
            }
            let chi = extension_cutoff(t, l);
            let mut out = vec![C64::new(0.0, 0.0); n];
            if chi != 0.0 {
                for (j, (x, lam)) in a.iter().zip(spec.eigenvalues()).enumerate() {
                    let w = *x * (chi * (-t * lam.abs()).exp());
                    for (o, e) in out.iter_mut().zip(spec.eigenvectors().col_as_slice(j)) {
                        *o += w * e;
                    }
                }
            }
            out
        })
        .collect())
}

fn check_nodes(op: &CylinderOperator, u: &[Vec<C64>]) -> Result<()> {
    if u.len() != op.intervals() + 1 || u.iter().any(|x| x.len() != op.slice_dim()) {
        return Err(Error::ShapeMismatch(format!(
            "expected {} node vectors of length {}",
            op.intervals() + 1,
            op.slice_dim()
        )));
    }
    Ok(())
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Discrete graph norm `(||u||^2 + ||D u||^2)^{1/2}` with midpoint quadrature.
pub fn graph_norm(op: &CylinderOperator, u: &[Vec<C64>]) -> Result<f64> {
    check_nodes(op, u)?;
    let h = op.timegrid().step();
    let du = op.apply(u)?;
    let mut total = 0.0;
    for k in 0..op.intervals() {
        let avg: Vec<C64> = u[k].iter().zip(&u[k + 1]).map(|(a, b)| (a + b) * 0.5).collect();
        total += h * (norm2(&avg) + norm2(&du[k]));
    }
    Ok(total.sqrt())
}

/// Discrete `H^1` norm `(||u||^2 + ||d_t u||^2 + ||A u||^2)^{1/2}`.
pub fn h1_norm(op: &CylinderOperator, u: &[Vec<C64>]) -> Result<f64> {
    check_nodes(op, u)?;
    let h = op.timegrid().step();
    let n = op.slice_dim();
    let mut av = vec![C64::new(0.0, 0.0); n];
    let mut total = 0.0;
    for k in 0..op.intervals() {
        let avg: Vec<C64> = u[k].iter().zip(&u[k + 1]).map(|(a, b)| (a + b) * 0.5).collect();
        let dt: Vec<C64> = u[k].iter().zip(&u[k + 1]).map(|(a, b)| (b - a) / h).collect();
        op.midpoint_operator(k).matrix().matvec(&avg, &mut av);
        total += h * (norm2(&avg) + norm2(&dt) + norm2(&av));
    }
    Ok(total.sqrt())
}

/// `||u(0)||_{H^{1/2}} / ||u||_{H^1}` for a section on the cylinder grid; `spec`
/// decomposes the operator at the left end.
pub fn trace_ratio(spec: &SpectralData, op: &CylinderOperator, u: &[Vec<C64>]) -> Result<f64> {
    let den = h1_norm(op, u)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("section has zero H^1 norm".into()));
    }
    Ok(sobolev_norm(spec, &u[0], 0.5)? / den)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos.saturating_add(len))
            .ok_or_else(|| Error::Linalg("truncated spectral data encoding".into()))?;
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_clifford, BoundarySlice};
    use crate::ops::{build_boundary_operator, PotentialField};

    fn diag(d: &[f64]) -> SpectralData {
        eigendecompose(&BoundaryOperator::points_diagonal(d).unwrap()).unwrap()
    }

    fn unit(n: usize, j: usize) -> Vec<C64> {
        (0..n).map(|i| c(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    #[test]
    fn diagonal_decomposition() {
        let s = diag(&[1.5, -1.5]);
        assert_eq!(s.eigenvalues(), &[-1.5, 1.5]);
        assert_eq!(s.eigenvectors()[(1, 0)].norm(), 1.0);
        assert_eq!(s.eigenvectors()[(0, 1)].norm(), 1.0);
    }

    #[test]
    fn projection_counts() {
        let s = diag(&[-2.0, -1.0, 1.0, 3.0]);
        assert_eq!(spectral_projection(&s, &SpectralInterval::below(0.0)).unwrap().ncols(), 2);
        assert_eq!(spectral_projection(&s, &SpectralInterval::all()).unwrap().ncols(), 4);
        assert_eq!(s.count_in(&SpectralInterval::half_open(-1.0 + 0.5, 3.5).unwrap()).unwrap(), 2);
    }

    #[test]
    fn collisions_follow_the_conventions() {
        let s = diag(&[0.0, 1.0, -1.0, 2.0]);
        assert_eq!(s.count_in(&SpectralInterval::below(0.0)).unwrap(), 1);
        assert_eq!(s.count_in(&SpectralInterval::at_or_below(0.0)).unwrap(), 2);
        match s.count_in(&SpectralInterval::below(1.0)) {
            Err(Error::EigenvalueCollision { cut, suggestion, .. }) => {
                assert_eq!(cut, 1.0);
                assert!((suggestion - 1.5).abs() < 1e-12 || (suggestion - 0.5).abs() < 1e-12);
            }
            other => panic!("expected a collision, got {other:?}"),
        }
    }

    #[test]
    fn sobolev_norm_of_eigenvectors() {
        let s = diag(&[2.0, -0.5]);
        for j in 0..2 {
            let u = s.eigenvectors().col_as_slice(j).to_vec();
            let l: f64 = s.eigenvalues()[j];
            for t in [-1.0, -0.5, 0.0, 0.5, 2.0] {
                let got = sobolev_norm(&s, &u, t).unwrap();
                assert!((got - (1.0 + l * l).powf(t / 2.0)).abs() < 1e-14);
            }
        }
        let u = vec![c(0.3, 0.1), c(-0.7, 0.2)];
        assert!((sobolev_norm(&s, &u, 0.0).unwrap() - norm2(&u).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hybrid_norm_single_modes() {
        let s = diag(&[2.0, -0.5]);
        let lo = s.eigenvectors().col_as_slice(0).to_vec();
        let hi = s.eigenvectors().col_as_slice(1).to_vec();
        let n = hybrid_norms(&s, &lo, 0.0).unwrap();
        assert!((n.check - 1.25f64.powf(0.25)).abs() < 1e-14);
        let n = hybrid_norms(&s, &hi, 0.0).unwrap();
        assert!((n.check - 5.0f64.powf(-0.25)).abs() < 1e-14);
    }

    #[test]
    fn hat_is_check_of_negation() {
        let slice = BoundarySlice::square(4, 1.5).unwrap();
        let cl = make_clifford(2).unwrap();
        let f = PotentialField::Linear { gx: 1.0, gy: 0.3 }.sample(&slice).unwrap();
        let op = build_boundary_operator(&slice, &cl, &f, 0.2).unwrap();
        let s = eigendecompose(&op).unwrap();
        let neg = eigendecompose(&op.negated()).unwrap();
        let u: Vec<C64> = (0..op.dim()).map(|i| c((i as f64).cos(), (2.0 * i as f64).sin())).collect();
        let a = 0.0;
        let n = hybrid_norms(&s, &u, a).unwrap();
        let m = hybrid_norms(&neg, &u, -a).unwrap();
        assert!((n.hat - m.check).abs() < 1e-10 * n.hat);
    }

    #[test]
    fn pairing_values_and_perfection() {
        let cl = make_clifford(2).unwrap();
        let op = BoundaryOperator::points_diagonal(&[1.0, -3.0]).unwrap();
        let s = eigendecompose(&op).unwrap();
        let sharp = eigendecompose(&op.adjoint_restriction()).unwrap();
        let u = s.eigenvectors().col_as_slice(0).to_vec();
        let v = apply_cdt(&cl, &u);
        assert!((duality_pairing(&cl, &u, &v).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        let alpha = c(0.3, 2.0);
        let au: Vec<C64> = u.iter().map(|x| x * alpha).collect();
        let lhs = duality_pairing(&cl, &au, &v).unwrap();
        assert!((lhs - alpha.conj() * duality_pairing(&cl, &u, &v).unwrap()).norm() < 1e-14);
        let g = pairing_gram(&s, &sharp, &cl).unwrap();
        let sv = crate::linalg::singular_values(g.as_ref()).unwrap();
        assert!(sv.iter().product::<f64>() > 1e-8);
    }

    #[test]
    fn extension_map_modes() {
        let s = diag(&[2.0, -0.5]);
        let grid = TimeGrid::new(3.0, 12).unwrap();
        let u = s.eigenvectors().col_as_slice(0).to_vec();
        let e = extension_map(&s, &u, &grid).unwrap();
        assert_eq!(e[0], u);
        for (k, t) in grid.nodes().into_iter().enumerate() {
            let want = extension_cutoff(t, 3.0) * (-t * 0.5f64).exp();
            let got = e[k].iter().zip(&u).map(|(a, b)| b.conj() * a).sum::<C64>();
            assert!((got - c(want, 0.0)).norm() < 1e-14);
        }
        assert_eq!(extension_cutoff(0.9, 3.0), 1.0);
        assert_eq!(extension_cutoff(2.1, 3.0), 0.0);
    }

    #[test]
    fn trace_ratio_rejects_zero() {
        let op = BoundaryOperator::points_diagonal(&[1.0, -1.0]).unwrap();
        let s = eigendecompose(&op).unwrap();
        let d = CylinderOperator::product(&op, TimeGrid::new(1.0, 4).unwrap()).unwrap();
        let z = vec![vec![c(0.0, 0.0); 2]; 5];
        assert!(matches!(trace_ratio(&s, &d, &z), Err(Error::ZeroDenominator(_))));
        let e = extension_map(&s, &unit(2, 0), d.timegrid()).unwrap();
        assert!(trace_ratio(&s, &d, &e).unwrap().is_finite());
    }

    #[test]
    fn window_matches_dense() {
        let slice = BoundarySlice::square(10, 3.0).unwrap();
        let cl = make_clifford(2).unwrap();
        let f = PotentialField::Bowl { strength: 1.0 }.sample(&slice).unwrap();
        let op = build_boundary_operator(&slice, &cl, &f, 0.0).unwrap();
        let full = eigendecompose(&op).unwrap();
        let win = eigendecompose_window(&op, 6, KrylovOptions::default()).unwrap();
        let radius = win.window().unwrap().radius;
        assert!(win.eigenvalues().len() >= 6);
        for l in win.eigenvalues() {
            assert!(full.eigenvalues().iter().any(|m| (l - m).abs() < 1e-9));
        }
        let inside = full.eigenvalues().iter().filter(|l| l.abs() <= radius).count();
        assert_eq!(inside, win.eigenvalues().len());
        let r = win.window().unwrap().radius * 0.5;
        assert_eq!(
            win.count_in(&SpectralInterval::below(r)).unwrap(),
            full.count_in(&SpectralInterval::below(r)).unwrap()
        );
    }

    #[test]
    fn bytes_round_trip() {
        let s = diag(&[2.0, -0.5, 0.0, 1.0]);
        let b = s.to_bytes();
        assert_eq!(SpectralData::from_bytes(&b).unwrap(), s);
        assert!(SpectralData::from_bytes(&b[..b.len() - 1]).is_err());
    }
}
