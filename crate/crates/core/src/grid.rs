//! Discretization substrate: boundary slices, fibre Clifford data and time grids.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Geometry of a discretized boundary slice.
#[derive(Debug, Clone, PartialEq)]
pub enum SliceKind {
    /// A finite set of points; the slice is zero-dimensional.
    Points { count: usize },
    /// A truncated square grid on `[-rx, rx] x [-ry, ry]` with cell-centred sites.
    Plane2D {
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        rx: f64,
        ry: f64,
    },
}

/// A discretized boundary manifold together with the fibre rank of the bundle over it.
///
/// Vectors on the slice are stored site-major: component `c` at site `s` lives at
/// index `s * fiber_rank + c`. Plane sites are ordered row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySlice {
    kind: SliceKind,
    fiber_rank: usize,
}

impl BoundarySlice {
    /// `count` isolated points carrying a fibre of rank `fiber_rank`.
    pub fn points(count: usize, fiber_rank: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidSlice("point slice needs at least one point".into()));
        }
        check_rank(fiber_rank)?;
        Ok(Self {
            kind: SliceKind::Points { count },
            fiber_rank,
        })
    }

    /// An `nx x ny` grid of cell-centred sites on `[-rx, rx] x [-ry, ry]`.
    ///
    /// Spacings are `hx = 2 rx / nx` and `hy = 2 ry / ny`; site `i` along `x`
    /// sits at `-rx + (i + 1/2) hx`. Only fibre rank 2 is supported.
    pub fn plane(nx: usize, ny: usize, rx: f64, ry: f64, fiber_rank: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidSlice(format!(
                "grid {nx}x{ny} needs at least two sites per axis"
            )));
        }
        if !(rx > 0.0 && ry > 0.0 && rx.is_finite() && ry.is_finite()) {
            return Err(Error::InvalidSlice(format!("half-widths ({rx}, {ry}) must be positive")));
        }
        check_rank(fiber_rank)?;
        if fiber_rank != 2 {
            return Err(Error::UnsupportedRank(fiber_rank));
        }
        Ok(Self {
            kind: SliceKind::Plane2D {
                nx,
                ny,
                hx: 2.0 * rx / nx as f64,
                hy: 2.0 * ry / ny as f64,
                rx,
                ry,
            },
            fiber_rank,
        })
    }

    /// Square plane grid with `n` sites per axis on `[-r, r]^2`.
    pub fn square(n: usize, r: f64) -> Result<Self> {
        Self::plane(n, n, r, r, 2)
    }

    pub fn kind(&self) -> &SliceKind {
        &self.kind
    }

    pub fn fiber_rank(&self) -> usize {
        self.fiber_rank
    }

    pub fn site_count(&self) -> usize {
        match self.kind {
            SliceKind::Points { count } => count,
            SliceKind::Plane2D { nx, ny, .. } => nx * ny,
        }
    }

    /// Dimension of the space of sections, `site_count * fiber_rank`.
    pub fn dim(&self) -> usize {
        self.site_count() * self.fiber_rank
    }

    /// Index of fibre component `component` at site `site`.
    pub fn index(&self, site: usize, component: usize) -> usize {
        debug_assert!(site < self.site_count() && component < self.fiber_rank);
        site * self.fiber_rank + component
    }

    /// Site index of grid point `(i, j)`.
    pub fn plane_site(&self, i: usize, j: usize) -> usize {
        match self.kind {
            SliceKind::Plane2D { nx, .. } => j * nx + i,
            SliceKind::Points { .. } => panic!("plane_site called on a point slice"),
        }
    }

    /// Coordinates of every site; point slices place their points on the x axis at integers.
    pub fn site_coords(&self) -> Vec<[f64; 2]> {
        match self.kind {
            SliceKind::Points { count } => (0..count).map(|k| [k as f64, 0.0]).collect(),
            SliceKind::Plane2D {
                nx, ny, hx, hy, rx, ry,
            } => {
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push([-rx + (i as f64 + 0.5) * hx, -ry + (j as f64 + 0.5) * hy]);
                    }
                }
                out
            }
        }
    }

    /// Sites on the outermost ring of a plane grid; empty for point slices.
    pub fn boundary_ring(&self) -> Vec<usize> {
        match self.kind {
            SliceKind::Points { .. } => Vec::new(),
            SliceKind::Plane2D { nx, ny, .. } => (0..ny)
                .flat_map(|j| (0..nx).map(move |i| (i, j)))
                .filter(|&(i, j)| i == 0 || j == 0 || i == nx - 1 || j == ny - 1)
                .map(|(i, j)| j * nx + i)
                .collect(),
        }
    }
}

fn check_rank(fiber_rank: usize) -> Result<()> {
    if fiber_rank == 0 || fiber_rank % 2 != 0 {
        return Err(Error::OddFiberRank(fiber_rank));
    }
    Ok(())
}

/// Fibre Clifford data in the graded basis.
///
/// `gammas` are Hermitian, square to the identity and anticommute with each
/// other and with `grading`. Clifford multiplication by a unit tangent vector is
/// `c(e_j) = i * gammas[j]`, so `c(e_j)^2 = -1`. `cdt = i * grading`.
#[derive(Debug, Clone)]
pub struct CliffordData {
    pub gammas: Vec<Mat<C64>>,
    pub grading: Mat<C64>,
    pub cdt: Mat<C64>,
}

impl CliffordData {
    pub fn rank(&self) -> usize {
        self.grading.nrows()
    }

    /// Sign of the grading on basis vector `component` (the grading is diagonal).
    pub fn grading_sign(&self, component: usize) -> f64 {
        self.grading[(component, component)].re
    }
}

/// Clifford data for a fibre of even rank `2k`: `grading = diag(I_k, -I_k)`.
///
/// For rank 2 the two generators are `sigma_y` and `sigma_x`, matching the
/// lattice Dirac operator `[[0, dx + i dy], [-dx + i dy, 0]]`. Higher ranks get
/// one generator (`[[0, I], [I, 0]]`), enough for point slices.
pub fn make_clifford(fiber_rank: usize) -> Result<CliffordData> {
    check_rank(fiber_rank)?;
    let k = fiber_rank / 2;
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let grading = Mat::<C64>::from_fn(fiber_rank, fiber_rank, |r, c| {
        if r != c {
            C64::new(0.0, 0.0)
        } else if r < k {
            one
        } else {
            -one
        }
    });
    let cdt = Mat::<C64>::from_fn(fiber_rank, fiber_rank, |r, c| grading[(r, c)] * i);
    let gammas = if fiber_rank == 2 {
        let sigma_y = Mat::<C64>::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => C64::new(0.0, 0.0),
        });
        let sigma_x = Mat::<C64>::from_fn(2, 2, |r, c| if r != c { one } else { C64::new(0.0, 0.0) });
        vec![sigma_y, sigma_x]
    } else {
        let swap = Mat::<C64>::from_fn(fiber_rank, fiber_rank, |r, c| {
            if (r + k == c) || (c + k == r) {
                one
            } else {
                C64::new(0.0, 0.0)
            }
        });
        vec![swap]
    };
    Ok(CliffordData {
        gammas,
        grading,
        cdt,
    })
}

/// Uniform grid `0 = t_0 < ... < t_K = L` along the cylinder axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    length: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("length {length} must be positive")));
        }
        if intervals == 0 {
            return Err(Error::InvalidTimeGrid("need at least one interval".into()));
        }
        Ok(Self { length, intervals })
    }

    /// Grid of `intervals` steps whose step satisfies `h * spectral_bound / 2 = 1/2`.
    ///
    /// Keeps every Cayley step `(1 + h A/2)^{-1}(1 - h A/2)` well conditioned when
    /// `spectral_bound` bounds the norms of the slice operators.
    pub fn resolving(intervals: usize, spectral_bound: f64) -> Result<Self> {
        let bound = spectral_bound.max(1.0);
        Self::new(intervals as f64 / bound, intervals)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn step(&self) -> f64 {
        self.length / self.intervals as f64
    }

    /// Node `t_k = k L / K`.
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.length / self.intervals as f64
    }

    /// Midpoint `t_{k+1/2}` of interval `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.length / self.intervals as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.node(k)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.intervals).map(|k| self.midpoint(k)).collect()
    }

    /// Same length, `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            length: self.length,
            intervals: self.intervals * factor.max(1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &Mat<C64>) -> f64 {
        let mut out = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out = out.max(m[(i, j)].norm());
            }
        }
        out
    }

    fn anticommutator(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        a * b + b * a
    }

    #[test]
    fn plane_example_spacing_and_sites() {
        let s = BoundarySlice::plane(4, 4, 1.0, 1.0, 2).unwrap();
        assert_eq!(s.site_count(), 16);
        assert_eq!(s.dim(), 32);
        match s.kind() {
            SliceKind::Plane2D { hx, hy, .. } => {
                assert_eq!(*hx, 0.5);
                assert_eq!(*hy, 0.5);
            }
            _ => unreachable!(),
        }
        let coords = s.site_coords();
        assert_eq!(coords[0], [-0.75, -0.75]);
        assert_eq!(coords[15], [0.75, 0.75]);
    }

    #[test]
    fn invalid_slices_rejected() {
        assert_eq!(BoundarySlice::points(3, 3), Err(Error::OddFiberRank(3)));
        assert!(BoundarySlice::points(0, 2).is_err());
        assert!(BoundarySlice::plane(1, 4, 1.0, 1.0, 2).is_err());
        assert!(BoundarySlice::plane(4, 4, -1.0, 1.0, 2).is_err());
        assert_eq!(BoundarySlice::plane(4, 4, 1.0, 1.0, 4), Err(Error::UnsupportedRank(4)));
    }

    #[test]
    fn odd_grid_contains_origin() {
        let s = BoundarySlice::square(33, 4.0).unwrap();
        let centre = s.site_coords()[s.plane_site(16, 16)];
        assert!(centre[0].abs() < 1e-15 && centre[1].abs() < 1e-15);
    }

    #[test]
    fn clifford_relations_exact() {
        for rank in [2usize, 4, 6] {
            let c = make_clifford(rank).unwrap();
            let id = Mat::<C64>::identity(rank, rank);
            assert_eq!(max_abs(&(&c.grading * &c.grading - &id)), 0.0);
            assert_eq!(max_abs(&(&c.cdt * &c.cdt + &id)), 0.0);
            assert_eq!(max_abs(&(c.cdt.adjoint().to_owned() + &c.cdt)), 0.0);
            for (j, gj) in c.gammas.iter().enumerate() {
                assert_eq!(max_abs(&(gj.adjoint().to_owned() - gj)), 0.0);
                assert_eq!(max_abs(&anticommutator(gj, &c.grading)), 0.0);
                for (k, gk) in c.gammas.iter().enumerate() {
                    let expected = if j == k { 2.0 } else { 0.0 };
                    let ac = anticommutator(gj, gk) - &id * faer::Scale(C64::new(expected, 0.0));
                    assert_eq!(max_abs(&ac), 0.0);
                }
            }
        }
        assert!(make_clifford(3).is_err());
    }

    #[test]
    fn rank_two_grading_and_cdt() {
        let c = make_clifford(2).unwrap();
        assert_eq!(c.grading[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(c.grading[(1, 1)], C64::new(-1.0, 0.0));
        assert_eq!(c.cdt[(0, 0)], C64::new(0.0, 1.0));
        assert_eq!(c.cdt[(1, 1)], C64::new(0.0, -1.0));
        assert_eq!(c.gammas.len(), 2);
    }

    #[test]
    fn time_grid_nodes() {
        let g = TimeGrid::new(1.0, 12).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(12), 1.0);
        assert!((g.step() * 12.0 - 1.0).abs() < 1e-15);
        assert!((g.midpoint(0) - 1.0 / 24.0).abs() < 1e-15);
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert_eq!(g.refined(2).intervals(), 24);
    }
}
