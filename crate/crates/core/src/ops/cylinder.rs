use std::sync::Arc;

use faer::Mat;

use super::boundary::{BoundaryOperator, CompactPerturbation};
use crate::error::{Error, Result};
use crate::grid::{make_clifford, BoundarySlice, CliffordData, TimeGrid};
use crate::linalg::{c, C64};

/// Smooth plateau `kappa: [0, 1] -> [0, 1]`: 0 on `[0, 1/3]`, 1 on `[2/3, 1]`.
pub fn plateau(tau: f64) -> f64 {
    let x = 3.0 * tau - 1.0;
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// The cylinder operator `c(dt)(d/dt + A^t)` on `[0, L] x N`, sampled at midpoints.
///
/// Row `k` of the discrete operator acts on node values as
/// `c(dt)((u_{k+1} - u_k)/h + A_{k+1/2}(u_k + u_{k+1})/2)`. The restriction to the
/// left end is `A^0 = family[0]`; the restriction to the right end is `-A^L`,
/// the negative of `family[K-1]`.
#[derive(Debug, Clone)]
pub struct CylinderOperator {
    timegrid: TimeGrid,
    family: Vec<Arc<BoundaryOperator>>,
    clifford: CliffordData,
    margins: (f64, f64),
    label: String,
}

/// Samples `family(t)` at the midpoints of `timegrid` and checks product margins.
///
/// `margins = (left, right)` are fractions of the axis on which the family must be
/// constant; each must contain at least one midpoint.
pub fn build_cylinder_operator(
    timegrid: TimeGrid,
    margins: (f64, f64),
    family: impl Fn(f64) -> Result<BoundaryOperator>,
) -> Result<CylinderOperator> {
    let ops: Vec<Arc<BoundaryOperator>> = timegrid
        .midpoints()
        .into_iter()
        .map(|t| family(t).map(Arc::new))
        .collect::<Result<_>>()?;
    CylinderOperator::from_samples(timegrid, margins, ops)
}

impl CylinderOperator {
    /// Builds from explicit midpoint samples, validating slices and margins.
    pub fn from_samples(
        timegrid: TimeGrid,
        margins: (f64, f64),
        family: Vec<Arc<BoundaryOperator>>,
    ) -> Result<Self> {
        if family.len() != timegrid.intervals() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for {} intervals",
                family.len(),
                timegrid.intervals()
            )));
        }
        let (left, right) = margins;
        if !(left > 0.0 && right > 0.0 && left + right <= 1.0) {
            return Err(Error::MarginViolation(format!(
                "margins ({left}, {right}) must be positive fractions summing to at most 1"
            )));
        }
        let slice = family[0].slice().clone();
        if family.iter().any(|op| op.slice() != &slice) {
            return Err(Error::ShapeMismatch("family members live on different slices".into()));
        }
        let l = timegrid.length();
        let left_idx: Vec<usize> = (0..family.len()).filter(|&k| timegrid.midpoint(k) <= left * l).collect();
        let right_idx: Vec<usize> =
            (0..family.len()).filter(|&k| timegrid.midpoint(k) >= (1.0 - right) * l).collect();
        if left_idx.is_empty() || right_idx.is_empty() {
            return Err(Error::MarginViolation(format!(
                "K = {} leaves a margin without midpoints",
                timegrid.intervals()
            )));
        }
        let last = family.len() - 1;
        for &k in &left_idx {
            if family[k].matrix() != family[0].matrix() {
                return Err(Error::MarginViolation(format!("family not constant on the left margin (interval {k})")));
            }
        }
        for &k in &right_idx {
            if family[k].matrix() != family[last].matrix() {
                return Err(Error::MarginViolation(format!("family not constant on the right margin (interval {k})")));
            }
        }
        let clifford = make_clifford(slice.fiber_rank())?;
        Ok(Self {
            timegrid,
            family,
            clifford,
            margins,
            label: "cylinder".into(),
        })
    }

    /// Product cylinder with constant family `op`.
    pub fn product(op: &BoundaryOperator, timegrid: TimeGrid) -> Result<Self> {
        let op = Arc::new(op.clone());
        Self::from_samples(timegrid, (0.5, 0.5), vec![op; timegrid.intervals()])
    }

    /// The cobordism `c(dt)(d/dt + A^{kappa(t/L)})` with `A^s = (1 - s) a0 + s a1`.
    pub fn interpolating(a0: &BoundaryOperator, a1: &BoundaryOperator, timegrid: TimeGrid) -> Result<Self> {
        let l = timegrid.length();
        build_cylinder_operator(timegrid, (1.0 / 3.0, 1.0 / 3.0), |t| {
            BoundaryOperator::lerp(a0, a1, plateau(t / l))
        })
    }

    /// The cobordism `c(dt)(d/dt + A^{kappa(t/L)})` along an arbitrary family `s -> A^s`.
    pub fn along_family(
        family: impl Fn(f64) -> Result<BoundaryOperator>,
        timegrid: TimeGrid,
    ) -> Result<Self> {
        let l = timegrid.length();
        build_cylinder_operator(timegrid, (1.0 / 3.0, 1.0 / 3.0), |t| family(plateau(t / l)))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn timegrid(&self) -> &TimeGrid {
        &self.timegrid
    }

    pub fn margins(&self) -> (f64, f64) {
        self.margins
    }

    pub fn slice(&self) -> &BoundarySlice {
        self.family[0].slice()
    }

    pub fn clifford(&self) -> &CliffordData {
        &self.clifford
    }

    /// Dimension `n` of the slice space.
    pub fn slice_dim(&self) -> usize {
        self.family[0].dim()
    }

    pub fn intervals(&self) -> usize {
        self.family.len()
    }

    pub fn family(&self) -> &[Arc<BoundaryOperator>] {
        &self.family
    }

    pub fn midpoint_operator(&self, k: usize) -> &BoundaryOperator {
        &self.family[k]
    }

    /// `A^0`, the restriction to the left end.
    pub fn left_operator(&self) -> &BoundaryOperator {
        &self.family[0]
    }

    /// `A^L`; the restriction to the right end is its negative.
    pub fn right_operator(&self) -> &BoundaryOperator {
        &self.family[self.family.len() - 1]
    }

    /// Midpoint indices inside the left and right product margins.
    pub fn margin_intervals(&self) -> (Vec<usize>, Vec<usize>) {
        let l = self.timegrid.length();
        let (left, right) = self.margins;
        let k = self.family.len();
        (
            (0..k).filter(|&i| self.timegrid.midpoint(i) <= left * l).collect(),
            (0..k).filter(|&i| self.timegrid.midpoint(i) >= (1.0 - right) * l).collect(),
        )
    }

    /// True if the family is constant on intervals `k - 1` and `k`, i.e. the
    /// operator is product in a neighbourhood of node `k`.
    pub fn is_product_at_node(&self, k: usize) -> bool {
        k > 0 && k < self.family.len() && self.family[k - 1].matrix() == self.family[k].matrix()
    }

    /// `c(dt) v` for a slice vector.
    pub fn apply_cdt(&self, v: &[C64]) -> Vec<C64> {
        let r = self.clifford.rank();
        v.iter()
            .enumerate()
            .map(|(i, &x)| x * c(0.0, self.clifford.grading_sign(i % r)))
            .collect()
    }

    /// The discrete operator applied to node values `u[0..=K]`; returns midpoint values.
    pub fn apply(&self, u: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let k = self.family.len();
        let n = self.slice_dim();
        if u.len() != k + 1 || u.iter().any(|x| x.len() != n) {
            return Err(Error::ShapeMismatch(format!("expected {} node vectors of length {n}", k + 1)));
        }
        let h = self.timegrid.step();
        let mut out = Vec::with_capacity(k);
        let mut av = vec![C64::new(0.0, 0.0); n];
        for i in 0..k {
            let avg: Vec<C64> = u[i].iter().zip(&u[i + 1]).map(|(a, b)| (a + b) * 0.5).collect();
            self.family[i].matrix().matvec(&avg, &mut av);
            let row: Vec<C64> = (0..n).map(|j| (u[i + 1][j] - u[i][j]) / h + av[j]).collect();
            out.push(self.apply_cdt(&row));
        }
        Ok(out)
    }

    /// The formal adjoint `c(dt)(d/dt + A#^t)` on the same grid.
    pub fn adjoint(&self) -> Self {
        let family = self.family.iter().map(|op| Arc::new(op.adjoint_restriction())).collect();
        Self {
            timegrid: self.timegrid,
            family,
            clifford: self.clifford.clone(),
            margins: self.margins,
            label: format!("{}*", self.label),
        }
    }

    /// Restriction to the node range `[k0, k1]` as a cylinder of its own.
    pub fn restricted(&self, k0: usize, k1: usize) -> Result<Self> {
        if k0 >= k1 || k1 > self.family.len() {
            return Err(Error::InvalidTimeGrid(format!("node range [{k0}, {k1}] is empty or out of range")));
        }
        let h = self.timegrid.step();
        let grid = TimeGrid::new(h * (k1 - k0) as f64, k1 - k0)?;
        let family = self.family[k0..k1].to_vec();
        let margin = (0.5 / (k1 - k0) as f64 + 1e-12).min(0.5);
        Self::from_samples(grid, (margin, margin), family)
    }

    /// Dense blocks `(M^-_k, M^+_k)` with `M^- = c(dt)(-I/h + A/2)` on `u_k` and
    /// `M^+ = c(dt)(I/h + A/2)` on `u_{k+1}`.
    pub fn step_blocks(&self, k: usize) -> (Mat<C64>, Mat<C64>) {
        let n = self.slice_dim();
        let h = self.timegrid.step();
        let a = self.family[k].to_dense();
        let r = self.clifford.rank();
        let cdt = |i: usize| c(0.0, self.clifford.grading_sign(i % r));
        let minus = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { -1.0 / h } else { 0.0 };
            cdt(i) * (a[(i, j)] * 0.5 + id)
        });
        let plus = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 / h } else { 0.0 };
            cdt(i) * (a[(i, j)] * 0.5 + id)
        });
        (minus, plus)
    }

    /// Applies a compact perturbation on the midpoints `intervals`, which must
    /// avoid both product margins.
    pub fn perturbed(&self, intervals: std::ops::Range<usize>, p: &CompactPerturbation) -> Result<Self> {
        let (left, right) = self.margin_intervals();
        if intervals.clone().any(|k| left.contains(&k) || right.contains(&k)) || intervals.end > self.family.len() {
            return Err(Error::InvalidPatch("touches the product margins of the cylinder".into()));
        }
        let mut family = self.family.clone();
        for k in intervals {
            family[k] = Arc::new(family[k].perturbed(p)?);
        }
        let mut out = Self::from_samples(self.timegrid, self.margins, family)?;
        out.label = format!("{}+patch", self.label);
        Ok(out)
    }

    /// Upper bound on the norms of all family members.
    pub fn norm_bound(&self) -> f64 {
        self.family.iter().map(|op| op.norm_bound()).fold(0.0, f64::max)
    }
}
