use super::condition::{aps_condition, dual_aps_condition, transmission_condition, BoundaryCondition, Side};
use super::index::{assemble_bvp, assemble_multi, compute_index, End, EndCondition, IndexOptions, IndexReport};
use crate::error::{Error, Result};
use crate::ops::{audit_cylinder, CylinderOperator, EssentialSupportReport};
use crate::spectral::{Eigensolver, SpectralInterval};

fn aps_ends(d: &CylinderOperator, solver: &dyn Eigensolver) -> Result<(BoundaryCondition, BoundaryCondition)> {
    let s0 = solver.decompose(d.left_operator())?;
    let s1 = solver.decompose(d.right_operator())?;
    Ok((aps_condition(&s0, 0.0, Side::Left)?, aps_condition(&s1, 0.0, Side::Right)?))
}

/// Index of `d` with APS conditions at both ends.
pub(crate) fn aps_index(d: &CylinderOperator, solver: &dyn Eigensolver, opts: &IndexOptions) -> Result<IndexReport> {
    let (b0, b1) = aps_ends(d, solver)?;
    compute_index(&assemble_bvp(d, &b0, &b1)?, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionChangeVerdict {
    pub a: f64,
    pub b: f64,
    pub index_a: IndexReport,
    pub index_b: IndexReport,
    /// Eigenvalues of the left restriction in `[a, b)` (or the kernel dimension
    /// for the dual change at 0).
    pub count: usize,
    pub holds: bool,
}

/// `ind D_{B(b)} - ind D_{B(a)} = #{lambda in [a, b)}` for the left condition,
/// with the APS condition kept at the right end.
pub fn check_condition_change(
    d: &CylinderOperator,
    solver: &dyn Eigensolver,
    a: f64,
    b: f64,
    opts: &IndexOptions,
) -> Result<ConditionChangeVerdict> {
    if !(a < b) {
        return Err(Error::IllPosed(format!("condition change needs a < b, got a = {a}, b = {b}")));
    }
    let s0 = solver.decompose(d.left_operator())?;
    let s1 = solver.decompose(d.right_operator())?;
    let right = aps_condition(&s1, 0.0, Side::Right)?;
    let ba = aps_condition(&s0, a, Side::Left)?;
    let bb = aps_condition(&s0, b, Side::Left)?;
    let count = s0.count_in(&SpectralInterval::half_open(a, b)?)?;
    let index_a = compute_index(&assemble_bvp(d, &ba, &right)?, opts)?;
    let index_b = compute_index(&assemble_bvp(d, &bb, &right)?, opts)?;
    let holds = index_b.index - index_a.index == count as i64;
    Ok(ConditionChangeVerdict {
        a,
        b,
        index_a,
        index_b,
        count,
        holds,
    })
}

/// Dual versus plain APS at 0 on the left: the indices differ by `dim ker A^0`.
pub fn check_dual_change(d: &CylinderOperator, solver: &dyn Eigensolver, opts: &IndexOptions) -> Result<ConditionChangeVerdict> {
    let s0 = solver.decompose(d.left_operator())?;
    let s1 = solver.decompose(d.right_operator())?;
    let right = aps_condition(&s1, 0.0, Side::Right)?;
    let plain = aps_condition(&s0, 0.0, Side::Left)?;
    let dual = dual_aps_condition(&s0, 0.0, Side::Left)?;
    let index_a = compute_index(&assemble_bvp(d, &plain, &right)?, opts)?;
    let index_b = compute_index(&assemble_bvp(d, &dual, &right)?, opts)?;
    let count = s0.kernel_dim();
    let holds = index_b.index - index_a.index == count as i64;
    Ok(ConditionChangeVerdict {
        a: 0.0,
        b: 0.0,
        index_a,
        index_b,
        count,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingVerdict {
    pub cut: usize,
    pub uncut: IndexReport,
    pub left: IndexReport,
    pub right: IndexReport,
    pub transmission: IndexReport,
    pub holds: bool,
}

/// Cuts `d` at node `cut`. The left piece gets the dual APS condition of its
/// right restriction `-A_c` (eigenvalues `lambda(A_c) >= 0`), the right piece the
/// APS condition `lambda(A_c) < 0`; the transmission route keeps both copies of
/// the cut slice and joins them with the diagonal.
pub fn check_splitting(
    d: &CylinderOperator,
    solver: &dyn Eigensolver,
    cut: usize,
    opts: &IndexOptions,
) -> Result<SplittingVerdict> {
    if !d.is_product_at_node(cut) {
        return Err(Error::NotProductAtCut(format!("node {cut} of {}", d.intervals())));
    }
    let (b0, b1) = aps_ends(d, solver)?;
    let uncut = compute_index(&assemble_bvp(d, &b0, &b1)?, opts)?;
    let lp = d.restricted(0, cut)?;
    let rp = d.restricted(cut, d.intervals())?;
    let sc = solver.decompose(d.midpoint_operator(cut))?;
    let at_cut_left = dual_aps_condition(&sc, 0.0, Side::Right)?;
    let at_cut_right = aps_condition(&sc, 0.0, Side::Left)?;
    let left = compute_index(&assemble_bvp(&lp, &b0, &at_cut_left)?, opts)?;
    let right = compute_index(&assemble_bvp(&rp, &at_cut_right, &b1)?, opts)?;
    let glued = assemble_multi(
        vec![lp, rp],
        vec![
            EndCondition {
                ends: vec![End::Left(0)],
                condition: b0,
            },
            EndCondition {
                ends: vec![End::Right(0), End::Left(1)],
                condition: transmission_condition(d.slice_dim()),
            },
            EndCondition {
                ends: vec![End::Right(1)],
                condition: b1,
            },
        ],
    )?;
    let transmission = compute_index(&glued, opts)?;
    let holds = uncut.index == left.index + right.index && transmission.index == uncut.index;
    Ok(SplittingVerdict {
        cut,
        uncut,
        left,
        right,
        transmission,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanishingVerdict {
    pub support: EssentialSupportReport,
    pub index: IndexReport,
    pub holds: bool,
}

/// With an empty `r`-essential support and invertible ends the APS index vanishes.
pub fn check_vanishing(
    d: &CylinderOperator,
    solver: &dyn Eigensolver,
    r: f64,
    opts: &IndexOptions,
) -> Result<VanishingVerdict> {
    let support = audit_cylinder(d, r)?;
    if !support.is_empty() {
        return Err(Error::NonEmptySupport {
            violating: support.violating_sites.len(),
        });
    }
    for (name, op) in [("left", d.left_operator()), ("right", d.right_operator())] {
        let k = solver.decompose(op)?.kernel_dim();
        if k > 0 {
            return Err(Error::NotInvertible(format!("{name} end has a kernel of dimension {k}")));
        }
    }
    let index = aps_index(d, solver, opts)?;
    let holds = index.index == 0;
    Ok(VanishingVerdict { support, index, holds })
}

fn product_beyond(d: &CylinderOperator, k: usize) -> Result<()> {
    if k == 0 || k >= d.intervals() {
        return Err(Error::InvalidTimeGrid(format!("truncation node {k} is not interior")));
    }
    let tail = d.midpoint_operator(k).matrix();
    if (k..d.intervals()).any(|j| d.midpoint_operator(j).matrix() != tail) {
        return Err(Error::NotProductAtCut(format!("family varies beyond node {k}")));
    }
    Ok(())
}

fn support_before(d: &CylinderOperator, k: usize, r: f64) -> Result<()> {
    let tail = d.restricted(k, d.intervals())?;
    let rep = audit_cylinder(&tail, r)?;
    if !rep.is_empty() {
        return Err(Error::SupportNotContained(format!(
            "{} sites beyond node {k} violate the gap bound {r}",
            rep.violating_sites.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionVerdict {
    pub full: IndexReport,
    pub reduced: IndexReport,
    pub holds: bool,
}

/// Truncates `d` after node `k`: the family must be product beyond `k` and the
/// `r`-essential support must lie before it. The truncated problem gets the APS
/// condition of `-A_k` at its new right end.
pub fn check_reduction(
    d: &CylinderOperator,
    solver: &dyn Eigensolver,
    k: usize,
    r: f64,
    opts: &IndexOptions,
) -> Result<ReductionVerdict> {
    product_beyond(d, k)?;
    support_before(d, k, r)?;
    let full = aps_index(d, solver, opts)?;
    let reduced = aps_index(&d.restricted(0, k)?, solver, opts)?;
    let holds = full.index == reduced.index;
    Ok(ReductionVerdict { full, reduced, holds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceVerdict {
    pub first: IndexReport,
    pub second: IndexReport,
    pub holds: bool,
}

/// Two extensions of a common piece `[0, t_k]` that carry the whole `r`-essential
/// support and end at the same operator have equal APS indices.
pub fn check_independence(
    d1: &CylinderOperator,
    d2: &CylinderOperator,
    k: usize,
    solver: &dyn Eigensolver,
    r: f64,
    opts: &IndexOptions,
) -> Result<IndependenceVerdict> {
    if (d1.timegrid().step() - d2.timegrid().step()).abs() > 1e-12 * d1.timegrid().step()
        || k == 0
        || k >= d1.intervals().min(d2.intervals())
        || (0..k).any(|j| d1.midpoint_operator(j) != d2.midpoint_operator(j))
    {
        return Err(Error::IncompatibleGlue(format!("extensions do not share the first {k} intervals")));
    }
    if d1.right_operator() != d2.right_operator() {
        return Err(Error::IncompatibleGlue("extensions end at different operators".into()));
    }
    support_before(d1, k, r)?;
    support_before(d2, k, r)?;
    let first = aps_index(d1, solver, opts)?;
    let second = aps_index(d2, solver, opts)?;
    let holds = first.index == second.index;
    Ok(IndependenceVerdict { first, second, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::ops::BoundaryOperator;
    use crate::spectral::DenseEigensolver;

    fn diag(d: &[f64]) -> BoundaryOperator {
        BoundaryOperator::points_diagonal(d).unwrap()
    }

    fn crossing(k: usize) -> CylinderOperator {
        CylinderOperator::interpolating(&diag(&[1.0, -1.0]), &diag(&[1.0, 1.0]), TimeGrid::new(1.0, k).unwrap()).unwrap()
    }

    #[test]
    fn condition_change_counts_eigenvalues() {
        let a = diag(&[-2.0, -1.0, 1.0, 3.0]);
        let d = CylinderOperator::product(&a, TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let opts = IndexOptions::default();
        let v = check_condition_change(&d, &DenseEigensolver, -1.5, 0.5, &opts).unwrap();
        assert_eq!(v.count, 1);
        assert_eq!(v.index_b.index - v.index_a.index, 1);
        assert!(v.holds);
        let same = check_condition_change(&d, &DenseEigensolver, 0.2, 0.7, &opts).unwrap();
        assert_eq!(same.index_a.index, same.index_b.index);
        let k = diag(&[0.0, 2.0, -1.0, 0.0]);
        let d = CylinderOperator::product(&k, TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let dual = check_dual_change(&d, &DenseEigensolver, &opts).unwrap();
        assert_eq!(dual.count, 2);
        assert!(dual.holds);
    }

    #[test]
    fn splitting_product_and_crossing() {
        let opts = IndexOptions::default();
        let d = CylinderOperator::product(&diag(&[1.0, -1.0]), TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let v = check_splitting(&d, &DenseEigensolver, 3, &opts).unwrap();
        assert_eq!((v.left.index, v.right.index), (0, 0));
        assert!(v.holds);
        let d = crossing(9);
        let v = check_splitting(&d, &DenseEigensolver, 7, &opts).unwrap();
        assert_eq!((v.left.index, v.right.index), (1, 0));
        assert!(v.holds);
        assert!(matches!(check_splitting(&d, &DenseEigensolver, 4, &opts), Err(Error::NotProductAtCut(_))));
    }

    #[test]
    fn vanishing_and_its_preconditions() {
        let opts = IndexOptions::default();
        let d = CylinderOperator::product(&diag(&[3.0, -3.0]), TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let v = check_vanishing(&d, &DenseEigensolver, 1.0, &opts).unwrap();
        assert!(v.holds);
        let z = CylinderOperator::product(&diag(&[0.0, 0.0]), TimeGrid::new(1.0, 6).unwrap()).unwrap();
        assert!(check_vanishing(&z, &DenseEigensolver, 0.0, &opts).unwrap_err().is_precondition());
        assert!(matches!(
            check_vanishing(&crossing(9), &DenseEigensolver, 0.5, &opts),
            Err(Error::NonEmptySupport { .. })
        ));
    }

    #[test]
    fn reduction_and_independence() {
        let opts = IndexOptions::default();
        // Crossing in the first part, then a long product tail.
        let a1 = diag(&[1.0, 1.0]);
        let head = crossing(9);
        let mut fam = head.family().to_vec();
        fam.extend(std::iter::repeat(fam[8].clone()).take(9));
        let long = CylinderOperator::from_samples(TimeGrid::new(2.0, 18).unwrap(), (1.0 / 6.0, 0.5), fam).unwrap();
        let v = check_reduction(&long, &DenseEigensolver, 9, 0.5, &opts).unwrap();
        assert!(v.holds);
        assert_eq!(v.full.index, 1);
        assert!(matches!(check_reduction(&long, &DenseEigensolver, 4, 0.5, &opts), Err(Error::NotProductAtCut(_))));
        // Second extension: a detour through 2 A_1 and back.
        let mut fam2 = head.family().to_vec();
        let m = 36;
        for j in 0..m {
            let w = if j == m - 1 { 0.0 } else { 0.5 * (std::f64::consts::PI * j as f64 / (m - 1) as f64).sin().powi(2) };
            fam2.push(std::sync::Arc::new(BoundaryOperator::lerp(&a1, &diag(&[2.0, 2.0]), w).unwrap()));
        }
        let other =
            CylinderOperator::from_samples(TimeGrid::new(45.0 / 9.0, 45).unwrap(), (1.0 / 45.0, 1.0 / 45.0), fam2).unwrap();
        let w = check_independence(&long, &other, 9, &DenseEigensolver, 0.5, &opts).unwrap();
        assert!(w.holds);
    }
}
