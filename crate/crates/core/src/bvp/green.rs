use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::ops::CylinderOperator;

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cdt(op: &CylinderOperator, v: &[C64]) -> Vec<C64> {
    op.apply_cdt(v)
}

fn averages(u: &[Vec<C64>]) -> Vec<Vec<C64>> {
    u.windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a + b) * 0.5).collect())
        .collect()
}

fn boundary_term(op: &CylinderOperator, u: &[Vec<C64>], v: &[Vec<C64>]) -> C64 {
    let k = u.len() - 1;
    inner(&cdt(op, &u[0]), &v[0]) - inner(&cdt(op, &u[k]), &v[k])
}

fn check(op: &CylinderOperator, u: &[Vec<C64>], v: &[Vec<C64>]) -> Result<()> {
    let ok = |x: &[Vec<C64>]| x.len() == op.intervals() + 1 && x.iter().all(|y| y.len() == op.slice_dim());
    if !ok(u) || !ok(v) {
        return Err(Error::ShapeMismatch("sections do not match the cylinder grid".into()));
    }
    Ok(())
}

/// `(D u, v) - (u, D* v) + (c(dt) u(0), v(0)) - (c(dt) u(L), v(L))` with sections
/// paired at midpoints through node averages. The scheme satisfies summation by
/// parts for this pairing, so the residual is round-off.
pub fn green_residual_exact(op: &CylinderOperator, u: &[Vec<C64>], v: &[Vec<C64>]) -> Result<C64> {
    check(op, u, v)?;
    let h = op.timegrid().step();
    let du = op.apply(u)?;
    let dv = op.adjoint().apply(v)?;
    let (ub, vb) = (averages(u), averages(v));
    let mut sum = c(0.0, 0.0);
    for k in 0..op.intervals() {
        sum += (inner(&du[k], &vb[k]) - inner(&ub[k], &dv[k])) * h;
    }
    Ok(sum + boundary_term(op, u, v))
}

/// The same residual with the rectangle rule: midpoint values of `D u` are paired
/// with the left node values of `v`. First order in the time step for smooth
/// sections.
pub fn green_residual_rectangle(op: &CylinderOperator, u: &[Vec<C64>], v: &[Vec<C64>]) -> Result<C64> {
    check(op, u, v)?;
    let h = op.timegrid().step();
    let du = op.apply(u)?;
    let dv = op.adjoint().apply(v)?;
    let mut sum = c(0.0, 0.0);
    for k in 0..op.intervals() {
        sum += (inner(&du[k], &v[k]) - inner(&u[k], &dv[k])) * h;
    }
    Ok(sum + boundary_term(op, u, v))
}

/// Discrete `L^2` norm of a node section (midpoint rule on node averages).
pub fn section_norm(op: &CylinderOperator, u: &[Vec<C64>]) -> f64 {
    let h = op.timegrid().step();
    averages(u).iter().map(|x| inner(x, x).re * h).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::ops::BoundaryOperator;

    fn section(k: usize, n: usize, l: f64, phase: f64) -> Vec<Vec<C64>> {
        (0..=k)
            .map(|i| {
                let t = l * i as f64 / k as f64;
                (0..n).map(|j| c((t + phase * j as f64).sin(), (2.0 * t - j as f64).cos())).collect()
            })
            .collect()
    }

    #[test]
    fn midpoint_pairing_is_exact() {
        let a0 = BoundaryOperator::points_diagonal(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        let a1 = BoundaryOperator::points_diagonal(&[-1.0, 2.0, 0.5, 1.0]).unwrap();
        let d = CylinderOperator::interpolating(&a0, &a1, TimeGrid::new(2.0, 12).unwrap()).unwrap();
        let r = green_residual_exact(&d, &section(12, 4, 2.0, 0.3), &section(12, 4, 2.0, 1.1)).unwrap();
        assert!(r.norm() < 1e-12, "{r}");
    }

    #[test]
    fn rectangle_pairing_is_first_order() {
        let a0 = BoundaryOperator::points_diagonal(&[1.0, -2.0]).unwrap();
        let a1 = BoundaryOperator::points_diagonal(&[-1.0, 2.0]).unwrap();
        let mut ratios = Vec::new();
        for k in [12usize, 24, 48] {
            let d = CylinderOperator::interpolating(&a0, &a1, TimeGrid::new(2.0, k).unwrap()).unwrap();
            let (u, v) = (section(k, 2, 2.0, 0.3), section(k, 2, 2.0, 1.1));
            let r = green_residual_rectangle(&d, &u, &v).unwrap().norm();
            ratios.push(r / (d.timegrid().step() * section_norm(&d, &u) * section_norm(&d, &v)));
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo < 2.0, "{ratios:?}");
    }
}
