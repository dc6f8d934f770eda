use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::BoundarySlice;
use crate::ops::BoundaryOperator;

type Generator = Arc<dyn Fn(f64) -> Result<BoundaryOperator> + Send + Sync>;

/// A sampled family `s -> A^s` on `[0, 1]`.
///
/// The generator is evaluated on demand (bisection needs off-grid values); the
/// grid fixes the coarse samples. Members must agree entrywise outside a compact
/// site set, which [`FamilySpec::compact_variation`] computes from the samples.
#[derive(Clone)]
pub struct FamilySpec {
    generator: Generator,
    grid: Vec<f64>,
    label: String,
}

impl fmt::Debug for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FamilySpec")
            .field("label", &self.label)
            .field("samples", &self.grid.len())
            .finish()
    }
}

impl FamilySpec {
    /// Family with `intervals + 1` uniform samples.
    pub fn new(
        generator: impl Fn(f64) -> Result<BoundaryOperator> + Send + Sync + 'static,
        intervals: usize,
    ) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidOperator("a family needs at least one interval".into()));
        }
        let grid = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
        Self::with_grid(generator, grid)
    }

    /// Family sampled on an explicit grid `0 = s_0 < ... < s_m = 1`.
    pub fn with_grid(
        generator: impl Fn(f64) -> Result<BoundaryOperator> + Send + Sync + 'static,
        grid: Vec<f64>,
    ) -> Result<Self> {
        if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != 1.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidOperator("family grid must increase strictly from 0 to 1".into()));
        }
        let f = Self {
            generator: Arc::new(generator),
            grid,
            label: "family".into(),
        };
        let first = f.at(0.0)?;
        for &s in &f.grid[1..] {
            if f.at(s)?.slice() != first.slice() {
                return Err(Error::ShapeMismatch(format!("family member at s = {s} lives on another slice")));
            }
        }
        Ok(f)
    }

    /// `(1 - s) a + s b`.
    pub fn linear(a: &BoundaryOperator, b: &BoundaryOperator, intervals: usize) -> Result<Self> {
        let (a, b) = (a.clone(), b.clone());
        Ok(Self::new(move |s| BoundaryOperator::lerp(&a, &b, s), intervals)?.with_label("linear"))
    }

    /// The constant family.
    pub fn constant(a: &BoundaryOperator, intervals: usize) -> Result<Self> {
        let a = a.clone();
        Ok(Self::new(move |_| Ok(a.clone()), intervals)?.with_label("constant"))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn at(&self, s: f64) -> Result<BoundaryOperator> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidOperator(format!("family parameter {s} outside [0, 1]")));
        }
        (self.generator)(s)
    }

    pub fn slice(&self) -> Result<BoundarySlice> {
        Ok(self.at(0.0)?.slice().clone())
    }

    /// `F` on `[0, 1/2]` followed by `G` on `[1/2, 1]`; needs `F(1) = G(0)`.
    pub fn concat(&self, g: &FamilySpec) -> Result<Self> {
        if self.at(1.0)? != g.at(0.0)? {
            return Err(Error::IncompatibleGlue("families do not match at the junction".into()));
        }
        let (f1, g1) = (self.generator.clone(), g.generator.clone());
        let mut grid: Vec<f64> = self.grid.iter().map(|s| s / 2.0).collect();
        grid.extend(g.grid[1..].iter().map(|s| 0.5 + s / 2.0));
        let out = Self::with_grid(
            move |s| if s <= 0.5 { f1((2.0 * s).min(1.0)) } else { g1((2.0 * s - 1.0).clamp(0.0, 1.0)) },
            grid,
        )?;
        Ok(out.with_label(format!("{}+{}", self.label, g.label)))
    }

    /// `s -> A^{1-s}`.
    pub fn reversed(&self) -> Self {
        let f = self.generator.clone();
        let grid = self.grid.iter().rev().map(|s| 1.0 - s).collect();
        Self {
            generator: Arc::new(move |s| f(1.0 - s)),
            grid,
            label: format!("rev({})", self.label),
        }
    }

    /// `s -> -A^s`.
    pub fn negated(&self) -> Self {
        let f = self.generator.clone();
        Self {
            generator: Arc::new(move |s| Ok(f(s)?.negated())),
            grid: self.grid.clone(),
            label: format!("-{}", self.label),
        }
    }

    /// Restriction to `[s0, s1]`, reparametrized to `[0, 1]` with `intervals` samples.
    pub fn restricted(&self, s0: f64, s1: f64, intervals: usize) -> Result<Self> {
        if !(0.0 <= s0 && s0 < s1 && s1 <= 1.0) {
            return Err(Error::InvalidOperator(format!("invalid sub-interval [{s0}, {s1}]")));
        }
        let f = self.generator.clone();
        Ok(Self::new(move |s| f(if s == 1.0 { s1 } else { s0 + (s1 - s0) * s }), intervals)?
            .with_label(format!("{}[{s0},{s1}]", self.label)))
    }

    /// Sites where some grid sample differs from the `s = 0` member.
    pub fn compact_variation(&self) -> Result<Vec<usize>> {
        let first = self.at(0.0)?;
        let mut sites = Vec::new();
        for &s in &self.grid[1..] {
            sites.extend(self.at(s)?.differing_sites(&first)?);
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(sites)
    }

    /// Largest finite-difference ratio `||A^{s_{i+1}} - A^{s_i}|| / (s_{i+1} - s_i)`
    /// over the grid, with the max-row-sum norm; a smoothness spot check.
    pub fn continuity_constant(&self) -> Result<f64> {
        let mut prev = self.at(self.grid[0])?;
        let mut worst = 0.0f64;
        for w in self.grid.windows(2) {
            let next = self.at(w[1])?;
            let d = next.matrix().sub(prev.matrix())?.norm_inf();
            worst = worst.max(d / (w[1] - w[0]));
            prev = next;
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> BoundaryOperator {
        BoundaryOperator::points_diagonal(d).unwrap()
    }

    #[test]
    fn grid_and_endpoints() {
        let f = FamilySpec::linear(&diag(&[1.0, -1.0]), &diag(&[1.0, 1.0]), 4).unwrap();
        assert_eq!(f.grid(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(f.at(1.0).unwrap(), diag(&[1.0, 1.0]));
        assert_eq!(f.reversed().at(0.0).unwrap(), diag(&[1.0, 1.0]));
        assert_eq!(f.negated().at(0.0).unwrap().to_dense()[(0, 0)].re, -1.0);
        assert!((f.continuity_constant().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn concat_checks_junction() {
        let f = FamilySpec::linear(&diag(&[1.0, -1.0]), &diag(&[1.0, 1.0]), 4).unwrap();
        let g = FamilySpec::linear(&diag(&[1.0, 1.0]), &diag(&[2.0, 1.0]), 2).unwrap();
        let fg = f.concat(&g).unwrap();
        assert_eq!(fg.grid().len(), 5 + 2);
        assert_eq!(fg.at(0.5).unwrap(), diag(&[1.0, 1.0]));
        assert_eq!(fg.at(1.0).unwrap(), diag(&[2.0, 1.0]));
        assert!(g.concat(&f).is_err());
    }

    #[test]
    fn compact_variation_of_points_family() {
        let a = diag(&[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
        let b = diag(&[1.0, -1.0, -2.0, 2.0, 3.0, -3.0]);
        let f = FamilySpec::linear(&a, &b, 3).unwrap();
        assert_eq!(f.compact_variation().unwrap(), vec![1]);
    }
}
