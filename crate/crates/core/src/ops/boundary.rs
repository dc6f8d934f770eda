use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{make_clifford, BoundarySlice, CliffordData, SliceKind};
use crate::linalg::{c, CsrMatrix, C64};

/// Built-in scalar fields `f` for the model potential `Psi = (f + m) Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialField {
    /// `f = value`.
    Constant(f64),
    /// `f = strength * (x^2 + y^2) / 2`.
    Bowl { strength: f64 },
    /// `f = gx * x + gy * y`.
    Linear { gx: f64, gy: f64 },
    /// Smooth radial step: `inside` near the origin, `outside` beyond `radius`,
    /// with a tanh transition of the given width.
    Plateau {
        inside: f64,
        outside: f64,
        radius: f64,
        width: f64,
    },
    /// One value per site in site order.
    Table(Vec<f64>),
}

impl PotentialField {
    /// Samples the field at every site of `slice`.
    pub fn sample(&self, slice: &BoundarySlice) -> Result<Vec<f64>> {
        let coords = slice.site_coords();
        let values: Vec<f64> = match self {
            PotentialField::Constant(v) => vec![*v; coords.len()],
            PotentialField::Bowl { strength } => coords
                .iter()
                .map(|[x, y]| strength * (x * x + y * y) / 2.0)
                .collect(),
            PotentialField::Linear { gx, gy } => coords.iter().map(|[x, y]| gx * x + gy * y).collect(),
            PotentialField::Plateau {
                inside,
                outside,
                radius,
                width,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidOperator("plateau width must be positive".into()));
                }
                coords
                    .iter()
                    .map(|[x, y]| {
                        let r = (x * x + y * y).sqrt();
                        let w = 0.5 * (1.0 + ((r - radius) / width).tanh());
                        inside + (outside - inside) * w
                    })
                    .collect()
            }
            PotentialField::Table(v) => {
                if v.len() != coords.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "table has {} values for {} sites",
                        v.len(),
                        coords.len()
                    )));
                }
                v.clone()
            }
        };
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidOperator(format!("potential is not finite at site {bad}")));
        }
        Ok(values)
    }
}

/// A Hermitian boundary operator `A + Psi` on a slice.
///
/// `dirac` anticommutes with the grading, `potential` commutes with it and is
/// block diagonal by site. `potential_samples` holds the grading coefficient of
/// each site block, `tr(Gamma Psi_x) / rank`, which is `f + m` for the model
/// potential.
#[derive(Debug, Clone)]
pub struct BoundaryOperator {
    slice: Arc<BoundarySlice>,
    dirac: CsrMatrix,
    potential: CsrMatrix,
    matrix: CsrMatrix,
    potential_samples: Vec<f64>,
    label: String,
}

impl PartialEq for BoundaryOperator {
    fn eq(&self, other: &Self) -> bool {
        self.slice == other.slice && self.dirac == other.dirac && self.potential == other.potential
    }
}

/// Model boundary operator: lattice Dirac part plus `(f + m) Gamma`.
///
/// On a plane slice the Dirac part couples the two grading components through
/// `K = d+_x + i d+_y` (forward differences, zero outside the box) and its exact
/// adjoint `K^H = -d-_x + i d-_y`. Point slices get a zero Dirac part.
pub fn build_boundary_operator(
    slice: &BoundarySlice,
    clifford: &CliffordData,
    potential: &[f64],
    mass: f64,
) -> Result<BoundaryOperator> {
    if clifford.rank() != slice.fiber_rank() {
        return Err(Error::ShapeMismatch(format!(
            "Clifford data of rank {} on a slice of fibre rank {}",
            clifford.rank(),
            slice.fiber_rank()
        )));
    }
    if potential.len() != slice.site_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} potential values for {} sites",
            potential.len(),
            slice.site_count()
        )));
    }
    let f: Vec<f64> = potential.iter().map(|v| v + mass).collect();
    let dirac = match slice.kind() {
        SliceKind::Points { .. } => CsrMatrix::zeros(slice.dim(), slice.dim()),
        SliceKind::Plane2D { .. } => lattice_dirac(slice),
    };
    let potential = graded_potential(slice, &f)?;
    BoundaryOperator::from_parts(slice.clone(), dirac, potential, "model")
}

fn lattice_dirac(slice: &BoundarySlice) -> CsrMatrix {
    let SliceKind::Plane2D { nx, ny, hx, hy, .. } = *slice.kind() else {
        unreachable!("lattice Dirac operator needs a plane slice")
    };
    let mut t = Vec::with_capacity(8 * nx * ny);
    let mut push = |row_site: usize, col_site: usize, k: C64| {
        let upper = slice.index(row_site, 0);
        let lower = slice.index(col_site, 1);
        t.push((upper, lower, k));
        t.push((lower, upper, k.conj()));
    };
    for j in 0..ny {
        for i in 0..nx {
            let s = slice.plane_site(i, j);
            push(s, s, c(-1.0 / hx, -1.0 / hy));
            if i + 1 < nx {
                push(s, slice.plane_site(i + 1, j), c(1.0 / hx, 0.0));
            }
            if j + 1 < ny {
                push(s, slice.plane_site(i, j + 1), c(0.0, 1.0 / hy));
            }
        }
    }
    CsrMatrix::from_triplets(slice.dim(), slice.dim(), t).expect("lattice indices are in range")
}

fn graded_potential(slice: &BoundarySlice, f: &[f64]) -> Result<CsrMatrix> {
    let clifford = make_clifford(slice.fiber_rank())?;
    let r = slice.fiber_rank();
    let t = (0..slice.site_count()).flat_map(|s| {
        let clifford = &clifford;
        (0..r).map(move |k| (s * r + k, s * r + k, c(f[s] * clifford.grading_sign(k), 0.0)))
    });
    CsrMatrix::from_triplets(slice.dim(), slice.dim(), t.collect::<Vec<_>>())
}

/// A compact perturbation: new potential values and/or Dirac entries on a site patch.
#[derive(Debug, Clone, Default)]
pub struct CompactPerturbation {
    /// Sites affected by the perturbation.
    pub sites: Vec<usize>,
    /// New grading coefficient `f + m` at each patch site (same order as `sites`).
    pub potential: Option<Vec<f64>>,
    /// New Dirac entries `(row, col, value)`; the adjoint entry is set as well.
    /// Both endpoints must lie in fibres over patch sites.
    pub dirac: Vec<(usize, usize, C64)>,
}

impl BoundaryOperator {
    /// Assembles an operator from its two summands, validating all invariants.
    pub fn from_parts(
        slice: BoundarySlice,
        dirac: CsrMatrix,
        potential: CsrMatrix,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = slice.dim();
        for (name, m) in [("dirac part", &dirac), ("potential part", &potential)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {}x{}, slice dimension is {n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let r = slice.fiber_rank();
        let clifford = make_clifford(r)?;
        let sign = |i: usize| clifford.grading_sign(i % r);
        let scale = dirac.max_abs().max(potential.max_abs()).max(1.0);
        let tol = 1e-12 * scale;
        let dev = dirac.hermitian_deviation().max(potential.hermitian_deviation());
        if dev > tol {
            return Err(Error::NonHermitian { deviation: dev });
        }
        for (i, j, v) in dirac.triplets() {
            if sign(i) == sign(j) && v.norm() > tol {
                return Err(Error::InvalidOperator(format!(
                    "dirac part does not anticommute with the grading at ({i}, {j})"
                )));
            }
        }
        let plane = matches!(slice.kind(), SliceKind::Plane2D { .. });
        for (i, j, v) in potential.triplets() {
            if i / r != j / r {
                return Err(Error::InvalidOperator(format!(
                    "potential part couples sites {} and {}",
                    i / r,
                    j / r
                )));
            }
            if sign(i) != sign(j) && v.norm() > tol {
                return Err(Error::InvalidOperator(format!(
                    "potential part does not commute with the grading at ({i}, {j})"
                )));
            }
        }
        let mut samples = vec![0.0; slice.site_count()];
        for (i, j, v) in potential.triplets() {
            if i == j {
                samples[i / r] += v.re * sign(i) / r as f64;
            }
        }
        if plane {
            // On a plane slice Psi must anticommute with Clifford multiplication,
            // which for rank 2 forces Psi_x = f_x Gamma.
            for (i, j, v) in potential.triplets() {
                let expected = if i == j { samples[i / r] * sign(i) } else { 0.0 };
                if (v - c(expected, 0.0)).norm() > tol {
                    return Err(Error::InvalidOperator(format!(
                        "plane potential block at site {} is not a multiple of the grading",
                        i / r
                    )));
                }
            }
        }
        let matrix = dirac.add(&potential)?;
        Ok(Self {
            slice: Arc::new(slice),
            dirac,
            potential,
            matrix,
            potential_samples: samples,
            label: label.into(),
        })
    }

    /// Point-slice operator with zero Dirac part and a diagonal potential.
    ///
    /// `diag` lists the diagonal in slice order; its length must be a multiple of 2
    /// and consecutive pairs form the (Gamma = +1, Gamma = -1) entries of a site.
    pub fn points_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() || diag.len() % 2 != 0 {
            return Err(Error::ShapeMismatch(format!("{} diagonal entries for a rank-2 point slice", diag.len())));
        }
        let slice = BoundarySlice::points(diag.len() / 2, 2)?;
        let d: Vec<C64> = diag.iter().map(|&v| c(v, 0.0)).collect();
        let n = slice.dim();
        Self::from_parts(slice, CsrMatrix::zeros(n, n), CsrMatrix::from_diagonal(&d), "diagonal")
    }

    /// Point-slice operator from a dense Dirac part and per-site potential blocks.
    pub fn points_dense(slice: BoundarySlice, dirac: &Mat<C64>, potential: &Mat<C64>) -> Result<Self> {
        Self::from_parts(slice, CsrMatrix::from_dense(dirac), CsrMatrix::from_dense(potential), "points")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn slice(&self) -> &BoundarySlice {
        &self.slice
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dirac_part(&self) -> &CsrMatrix {
        &self.dirac
    }

    pub fn potential_part(&self) -> &CsrMatrix {
        &self.potential
    }

    pub fn potential_samples(&self) -> &[f64] {
        &self.potential_samples
    }

    pub fn clifford(&self) -> CliffordData {
        make_clifford(self.slice.fiber_rank()).expect("slice rank was validated")
    }

    pub fn to_dense(&self) -> Mat<C64> {
        self.matrix.to_dense()
    }

    /// Upper bound on the spectral radius (maximum absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        self.matrix.norm_inf()
    }

    /// `-c(dt) M c(dt)^{-1}`: the boundary restriction of the formal adjoint.
    ///
    /// With `c(dt) = i Gamma` this keeps the Dirac part and negates the potential.
    pub fn adjoint_restriction(&self) -> Self {
        let r = self.slice.fiber_rank();
        let clifford = self.clifford();
        let conj = |m: &CsrMatrix| {
            let t: Vec<_> = m
                .triplets()
                .map(|(i, j, v)| (i, j, -v * clifford.grading_sign(i % r) * clifford.grading_sign(j % r)))
                .collect();
            CsrMatrix::from_triplets(m.nrows(), m.ncols(), t).expect("same pattern")
        };
        let dirac = conj(&self.dirac);
        let potential = conj(&self.potential);
        let matrix = dirac.add(&potential).expect("same shape");
        Self {
            slice: self.slice.clone(),
            potential_samples: self.potential_samples.iter().map(|v| -v).collect(),
            dirac,
            potential,
            matrix,
            label: format!("{}#", self.label),
        }
    }

    /// `-A`, used for boundary restrictions at the right end of a cylinder.
    pub fn negated(&self) -> Self {
        let m1 = c(-1.0, 0.0);
        Self {
            slice: self.slice.clone(),
            dirac: self.dirac.scale(m1),
            potential: self.potential.scale(m1),
            matrix: self.matrix.scale(m1),
            potential_samples: self.potential_samples.iter().map(|v| -v).collect(),
            label: format!("-{}", self.label),
        }
    }

    /// `(1 - s) a + s b`, returning exact clones at `s = 0` and `s = 1`.
    pub fn lerp(a: &Self, b: &Self, s: f64) -> Result<Self> {
        if a.slice != b.slice {
            return Err(Error::ShapeMismatch("interpolating operators on different slices".into()));
        }
        if s == 0.0 {
            return Ok(a.clone());
        }
        if s == 1.0 {
            return Ok(b.clone());
        }
        if a == b {
            return Ok(a.clone());
        }
        // Entries shared by both ends stay bit-identical along the path.
        let dirac = a.dirac.interpolate(&b.dirac, s)?;
        let potential = a.potential.interpolate(&b.potential, s)?;
        let matrix = dirac.add(&potential)?;
        Ok(Self {
            slice: a.slice.clone(),
            potential_samples: a
                .potential_samples
                .iter()
                .zip(&b.potential_samples)
                .map(|(x, y)| if x == y { *x } else { (1.0 - s) * x + s * y })
                .collect(),
            dirac,
            potential,
            matrix,
            label: format!("lerp({},{};{s})", a.label, b.label),
        })
    }

    /// Sites whose fibre blocks (potential or any Dirac coupling) differ from `other`.
    pub fn differing_sites(&self, other: &Self) -> Result<Vec<usize>> {
        if self.slice != other.slice {
            return Err(Error::ShapeMismatch("comparing operators on different slices".into()));
        }
        let r = self.slice.fiber_rank();
        let diff = self.matrix.sub(&other.matrix)?;
        let mut sites: Vec<usize> = diff.triplets().flat_map(|(i, j, _)| [i / r, j / r]).collect();
        sites.sort_unstable();
        sites.dedup();
        Ok(sites)
    }

    /// Applies a compact perturbation; entries outside the patch stay bitwise equal.
    pub fn perturbed(&self, p: &CompactPerturbation) -> Result<Self> {
        let r = self.slice.fiber_rank();
        let nsites = self.slice.site_count();
        if let Some(bad) = p.sites.iter().find(|&&s| s >= nsites) {
            return Err(Error::InvalidPatch(format!("site {bad} outside the slice")));
        }
        let in_patch = |idx: usize| p.sites.contains(&(idx / r));
        let mut potential = self.potential.clone();
        if let Some(values) = &p.potential {
            if values.len() != p.sites.len() {
                return Err(Error::InvalidPatch(format!(
                    "{} potential values for {} sites",
                    values.len(),
                    p.sites.len()
                )));
            }
            let clifford = self.clifford();
            let kept = self.potential.triplets().filter(|&(i, _, _)| !in_patch(i));
            let new = p.sites.iter().zip(values).flat_map(|(&s, &f)| {
                let clifford = &clifford;
                (0..r).map(move |k| (s * r + k, s * r + k, c(f * clifford.grading_sign(k), 0.0)))
            });
            potential = CsrMatrix::from_triplets(self.dim(), self.dim(), kept.chain(new).collect::<Vec<_>>())?;
        }
        let mut dirac = self.dirac.clone();
        if !p.dirac.is_empty() {
            let mut replaced: Vec<(usize, usize)> = Vec::new();
            for &(i, j, _) in &p.dirac {
                if i >= self.dim() || j >= self.dim() || !in_patch(i) || !in_patch(j) {
                    return Err(Error::InvalidPatch(format!("dirac entry ({i}, {j}) leaves the patch")));
                }
                replaced.push((i, j));
                replaced.push((j, i));
            }
            let kept = self.dirac.triplets().filter(|&(i, j, _)| !replaced.contains(&(i, j)));
            let new = p.dirac.iter().flat_map(|&(i, j, v)| {
                if i == j {
                    vec![(i, j, c(v.re, 0.0))]
                } else {
                    vec![(i, j, v), (j, i, v.conj())]
                }
            });
            dirac = CsrMatrix::from_triplets(self.dim(), self.dim(), kept.chain(new).collect::<Vec<_>>())?;
        }
        let out = Self::from_parts((*self.slice).clone(), dirac, potential, format!("{}+patch", self.label))?;
        Ok(out)
    }

    /// Largest modulus among inter-site couplings of `{A, Psi}`.
    ///
    /// Exactly zero when the potential is constant on each connected Dirac
    /// stencil; for varying `f` it is `O(|grad f|)`, the lattice shadow of a
    /// zeroth-order anticommutator.
    pub fn anticommutator_intersite(&self) -> f64 {
        let r = self.slice.fiber_rank();
        let ac = self.anticommutator();
        ac.triplets().filter(|&(i, j, _)| i / r != j / r).map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// `A Psi + Psi A` as a sparse matrix.
    pub fn anticommutator(&self) -> CsrMatrix {
        let ap = self.dirac.matmul(&self.potential).expect("square");
        let pa = self.potential.matmul(&self.dirac).expect("square");
        ap.add(&pa).expect("same shape")
    }

    /// Appends a canonical byte encoding of the operator to `out`.
    pub fn write_canonical_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.slice.fiber_rank() as u64).to_le_bytes());
        self.dirac.write_canonical_bytes(out);
        self.potential.write_canonical_bytes(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;

    fn eigs(op: &BoundaryOperator) -> Vec<f64> {
        hermitian_eigen(op.to_dense().as_ref()).unwrap().0
    }

    #[test]
    fn single_point_mass() {
        let slice = BoundarySlice::points(1, 2).unwrap();
        let cl = make_clifford(2).unwrap();
        let op = build_boundary_operator(&slice, &cl, &[0.5], 1.5).unwrap();
        let m = op.to_dense();
        assert_eq!(m[(0, 0)], c(2.0, 0.0));
        assert_eq!(m[(1, 1)], c(-2.0, 0.0));
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
        assert_eq!(op.potential_samples(), &[2.0]);
    }

    #[test]
    fn constant_points_spectrum() {
        let slice = BoundarySlice::points(3, 2).unwrap();
        let cl = make_clifford(2).unwrap();
        let op = build_boundary_operator(&slice, &cl, &[2.0; 3], 0.0).unwrap();
        assert_eq!(eigs(&op), vec![-2.0, -2.0, -2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn plane_operator_is_exactly_hermitian_and_split() {
        let slice = BoundarySlice::square(6, 2.0).unwrap();
        let cl = make_clifford(2).unwrap();
        let f = PotentialField::Bowl { strength: 1.0 }.sample(&slice).unwrap();
        let op = build_boundary_operator(&slice, &cl, &f, 0.3).unwrap();
        assert_eq!(op.matrix().hermitian_deviation(), 0.0);
        assert_eq!(op.matrix(), &op.dirac_part().add(op.potential_part()).unwrap());
        // Dirac part alone: spectrum symmetric and no zero modes (no doublers).
        let free = BoundaryOperator::from_parts(
            slice.clone(),
            op.dirac_part().clone(),
            CsrMatrix::zeros(op.dim(), op.dim()),
            "free",
        )
        .unwrap();
        let ev = eigs(&free);
        for (a, b) in ev.iter().zip(ev.iter().rev()) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn lattice_symbol_zeros() {
        // Symbol of K = d+_x + i d+_y at lattice momenta (a, b) = (kx h, ky h).
        // It vanishes at the origin and at one doubler point (pi/2, -pi/2); no other
        // zeros exist on the Brillouin torus.
        let k = |a: f64, b: f64| c(a.cos() - 1.0, a.sin()) + c(0.0, 1.0) * c(b.cos() - 1.0, b.sin());
        let half = std::f64::consts::FRAC_PI_2;
        assert!(k(0.0, 0.0).norm() < 1e-15);
        assert!(k(half, -half).norm() < 1e-15);
        let m = 64;
        let mut near_zero = 0;
        for i in 0..m {
            for j in 0..m {
                let a = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                let b = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                if k(a, b).norm() < 1e-12 {
                    near_zero += 1;
                }
            }
        }
        assert_eq!(near_zero, 2);
    }

    #[test]
    fn adjoint_restriction_negates_spectrum_and_is_involution() {
        let slice = BoundarySlice::square(5, 2.0).unwrap();
        let cl = make_clifford(2).unwrap();
        let f = PotentialField::Linear { gx: 1.0, gy: -0.5 }.sample(&slice).unwrap();
        let op = build_boundary_operator(&slice, &cl, &f, 1.0).unwrap();
        let sharp = op.adjoint_restriction();
        let a = eigs(&op);
        let b = eigs(&sharp);
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert!((x + y).abs() < 1e-10);
        }
        assert_eq!(sharp.adjoint_restriction().matrix(), op.matrix());
        let diag = BoundaryOperator::points_diagonal(&[2.0, -2.0]).unwrap();
        let d = diag.adjoint_restriction().to_dense();
        assert_eq!(d[(0, 0)], c(-2.0, 0.0));
        assert_eq!(d[(1, 1)], c(2.0, 0.0));
    }

    #[test]
    fn anticommutator_local_for_constant_field() {
        let slice = BoundarySlice::square(6, 2.0).unwrap();
        let cl = make_clifford(2).unwrap();
        let op = build_boundary_operator(&slice, &cl, &[1.7; 36], 0.0).unwrap();
        assert_eq!(op.anticommutator_intersite(), 0.0);
        assert_eq!(op.anticommutator().nnz(), 0);
    }

    #[test]
    fn anticommutator_stays_bounded_under_refinement() {
        // {A, f Gamma} couples neighbours with weight (f_x - f_y)/h, which tends to |grad f|.
        let cl = make_clifford(2).unwrap();
        let mut prev: Option<f64> = None;
        for n in [8usize, 16, 32] {
            let slice = BoundarySlice::square(n, 2.0).unwrap();
            let f = PotentialField::Linear { gx: 1.0, gy: 0.0 }.sample(&slice).unwrap();
            let op = build_boundary_operator(&slice, &cl, &f, 0.0).unwrap();
            let v = op.anticommutator_intersite();
            assert!((v - 1.0).abs() < 1e-9, "n={n}: {v}");
            if let Some(p) = prev {
                assert!((v - p).abs() < 1e-9);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn invalid_parts_rejected() {
        let slice = BoundarySlice::points(1, 2).unwrap();
        let n = 2;
        let bad_dirac = CsrMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(BoundaryOperator::from_parts(slice.clone(), bad_dirac, CsrMatrix::zeros(n, n), "x").is_err());
        let non_herm = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0))]).unwrap();
        assert!(matches!(
            BoundaryOperator::from_parts(slice.clone(), non_herm, CsrMatrix::zeros(n, n), "x"),
            Err(Error::NonHermitian { .. })
        ));
        let off = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]).unwrap();
        assert!(BoundaryOperator::from_parts(slice.clone(), CsrMatrix::zeros(n, n), off, "x").is_err());
        let cl4 = make_clifford(4).unwrap();
        assert!(build_boundary_operator(&slice, &cl4, &[1.0], 0.0).is_err());
    }

    #[test]
    fn perturbation_is_local() {
        let slice = BoundarySlice::points(2, 2).unwrap();
        let cl = make_clifford(2).unwrap();
        let op = build_boundary_operator(&slice, &cl, &[1.0, 1.0], 0.0).unwrap();
        let same = op.perturbed(&CompactPerturbation::default()).unwrap();
        assert_eq!(same.matrix(), op.matrix());
        let flipped = op
            .perturbed(&CompactPerturbation {
                sites: vec![1],
                potential: Some(vec![-1.0]),
                dirac: Vec::new(),
            })
            .unwrap();
        assert_eq!(flipped.differing_sites(&op).unwrap(), vec![1]);
        let d = flipped.to_dense();
        assert_eq!(d[(2, 2)], c(-1.0, 0.0));
        assert_eq!(d[(0, 0)], c(1.0, 0.0));
        let bad = CompactPerturbation {
            sites: vec![0],
            potential: None,
            dirac: vec![(0, 3, c(1.0, 0.0))],
        };
        assert!(op.perturbed(&bad).is_err());
    }

    #[test]
    fn lerp_endpoints_exact() {
        let a = BoundaryOperator::points_diagonal(&[1.0, -1.0]).unwrap();
        let b = BoundaryOperator::points_diagonal(&[1.0, 1.0]).unwrap();
        assert_eq!(BoundaryOperator::lerp(&a, &b, 0.0).unwrap(), a);
        assert_eq!(BoundaryOperator::lerp(&a, &b, 1.0).unwrap(), b);
        let mid = BoundaryOperator::lerp(&a, &b, 0.5).unwrap().to_dense();
        assert_eq!(mid[(1, 1)], c(0.0, 0.0));
    }
}
