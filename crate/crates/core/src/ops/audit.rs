use faer::Mat;

use super::boundary::BoundaryOperator;
use super::cylinder::CylinderOperator;
use crate::error::{Error, Result};
use crate::grid::BoundarySlice;
use crate::linalg::{hermitian_eigen, singular_values, CsrMatrix, C64};

/// Axis-aligned box in slice coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBox {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl SupportBox {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|a| p[a] >= self.lower[a] && p[a] <= self.upper[a])
    }
}

/// Result of auditing the growth condition `Psi^2(x) - |{A, Psi}(x)| >= R`.
#[derive(Debug, Clone, PartialEq)]
pub struct EssentialSupportReport {
    pub r: f64,
    pub per_site_gap: Vec<f64>,
    pub satisfied_sites: Vec<usize>,
    pub violating_sites: Vec<usize>,
    /// Bounding box of the violating sites; `None` when the support is empty.
    pub candidate_support: Option<SupportBox>,
}

impl EssentialSupportReport {
    pub fn is_empty(&self) -> bool {
        self.violating_sites.is_empty()
    }

    fn from_gaps(slice: &BoundarySlice, r: f64, gaps: Vec<f64>) -> Self {
        let (satisfied, violating): (Vec<usize>, Vec<usize>) = (0..gaps.len()).partition(|&x| gaps[x] >= r);
        let coords = slice.site_coords();
        let candidate_support = (!violating.is_empty()).then(|| {
            let mut b = SupportBox {
                lower: [f64::INFINITY; 2],
                upper: [f64::NEG_INFINITY; 2],
            };
            for &x in &violating {
                for a in 0..2 {
                    b.lower[a] = b.lower[a].min(coords[x][a]);
                    b.upper[a] = b.upper[a].max(coords[x][a]);
                }
            }
            b
        });
        Self {
            r,
            per_site_gap: gaps,
            satisfied_sites: satisfied,
            violating_sites: violating,
            candidate_support,
        }
    }
}

fn site_block(m: &CsrMatrix, site: usize, r: usize) -> Mat<C64> {
    let mut b = Mat::zeros(r, r);
    for a in 0..r {
        for (j, v) in m.row(site * r + a) {
            if j / r == site {
                b[(a, j % r)] += v;
            }
        }
    }
    b
}

/// Row-block sums of `m`: the fibre endomorphism obtained by lumping all couplings
/// out of each site.
fn lumped_blocks(m: &CsrMatrix, sites: usize, r: usize) -> Vec<Mat<C64>> {
    let mut out = vec![Mat::zeros(r, r); sites];
    for (i, j, v) in m.triplets() {
        out[i / r][(i % r, j % r)] += v;
    }
    out
}

fn spectral_norm(b: &Mat<C64>) -> Result<f64> {
    Ok(singular_values(b.as_ref())?.first().copied().unwrap_or(0.0))
}

fn boundary_gaps(op: &BoundaryOperator) -> Result<Vec<f64>> {
    let slice = op.slice();
    let r = slice.fiber_rank();
    let sites = slice.site_count();
    let ac = lumped_blocks(&op.anticommutator(), sites, r);
    (0..sites)
        .map(|x| {
            let p = site_block(op.potential_part(), x, r);
            let p2 = &p * &p;
            let lmin = hermitian_eigen(p2.as_ref())?.0[0];
            Ok(lmin - spectral_norm(&ac[x])?)
        })
        .collect()
}

/// Audits a boundary operator. The per-site anticommutator norm is the spectral
/// norm of the lumped fibre block of `{A, Psi}` at the site.
pub fn audit_strong_callias(op: &BoundaryOperator, r: f64) -> Result<EssentialSupportReport> {
    if !(r >= 0.0) {
        return Err(Error::InvalidOperator(format!("audit radius must be nonnegative, got {r}")));
    }
    Ok(EssentialSupportReport::from_gaps(op.slice(), r, boundary_gaps(op)?))
}

/// Audits a cylinder operator: at each site the gap is minimised over all
/// midpoints, and the `t`-derivative of the potential counts towards the
/// anticommutator.
pub fn audit_cylinder(op: &CylinderOperator, r: f64) -> Result<EssentialSupportReport> {
    if !(r >= 0.0) {
        return Err(Error::InvalidOperator(format!("audit radius must be nonnegative, got {r}")));
    }
    let slice = op.slice();
    let rank = slice.fiber_rank();
    let h = op.timegrid().step();
    let mut gaps = vec![f64::INFINITY; slice.site_count()];
    for k in 0..op.intervals() {
        let g = boundary_gaps(op.midpoint_operator(k))?;
        let dt = if k + 1 < op.intervals() {
            let d = op.midpoint_operator(k + 1).potential_part().sub(op.midpoint_operator(k).potential_part())?;
            Some(d.scale(C64::new(1.0 / h, 0.0)))
        } else {
            None
        };
        for (x, gap) in g.into_iter().enumerate() {
            let extra = match &dt {
                Some(d) => spectral_norm(&site_block(d, x, rank))?,
                None => 0.0,
            };
            gaps[x] = gaps[x].min(gap - extra);
        }
    }
    Ok(EssentialSupportReport::from_gaps(slice, r, gaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_clifford, TimeGrid};
    use crate::ops::{build_boundary_operator, PotentialField};

    #[test]
    fn constant_mass_thresholds() {
        let slice = BoundarySlice::points(4, 2).unwrap();
        let cl = make_clifford(2).unwrap();
        let op = build_boundary_operator(&slice, &cl, &[3.0; 4], 0.0).unwrap();
        let hi = audit_strong_callias(&op, 10.0).unwrap();
        assert_eq!(hi.violating_sites, vec![0, 1, 2, 3]);
        assert!(hi.per_site_gap.iter().all(|&g| (g - 9.0).abs() < 1e-12));
        let lo = audit_strong_callias(&op, 4.0).unwrap();
        assert!(lo.is_empty());
        assert!(lo.candidate_support.is_none());
        assert!(audit_strong_callias(&op, 0.0).unwrap().is_empty());
        assert!(audit_strong_callias(&op, -1.0).is_err());
    }

    #[test]
    fn bowl_support_is_a_central_disc() {
        let slice = BoundarySlice::square(33, 4.0).unwrap();
        let cl = make_clifford(2).unwrap();
        let f = PotentialField::Bowl { strength: 1.0 }.sample(&slice).unwrap();
        let op = build_boundary_operator(&slice, &cl, &f, 0.0).unwrap();
        let rep = audit_strong_callias(&op, 1.0).unwrap();
        let coords = slice.site_coords();
        assert!(!rep.is_empty());
        // Continuum oracle: f^2 - |grad f| = r^4/4 - r < 1 only for r < ~1.75.
        for &x in &rep.violating_sites {
            let [a, b] = coords[x];
            assert!((a * a + b * b).sqrt() < 2.0);
        }
        let sb = rep.candidate_support.unwrap();
        for &x in &rep.violating_sites {
            assert!(sb.contains(coords[x]));
        }
        for &x in &rep.satisfied_sites {
            assert!(rep.per_site_gap[x] >= 1.0);
        }
    }

    #[test]
    fn cylinder_audit_includes_time_derivative() {
        let a = BoundaryOperator::points_diagonal(&[3.0, -3.0]).unwrap();
        let b = BoundaryOperator::points_diagonal(&[4.0, -4.0]).unwrap();
        let d = CylinderOperator::interpolating(&a, &b, TimeGrid::new(0.3, 9).unwrap()).unwrap();
        let rep = audit_cylinder(&d, 0.0).unwrap();
        assert!(rep.per_site_gap[0] < 9.0);
        let prod = CylinderOperator::product(&a, TimeGrid::new(1.0, 4).unwrap()).unwrap();
        assert!((audit_cylinder(&prod, 0.0).unwrap().per_site_gap[0] - 9.0).abs() < 1e-12);
    }
}
