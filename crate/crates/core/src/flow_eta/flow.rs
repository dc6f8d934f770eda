use std::sync::Arc;

use rayon::prelude::*;

use super::family::FamilySpec;
use crate::error::{Error, Result};
use crate::ops::BoundaryOperator;
use crate::spectral::{Eigensolver, SpectralData, SpectralInterval};

/// Crossings are isolated to s-intervals of this width.
pub const CROSSING_WIDTH: f64 = 1e-6;

/// Weyl bounds are inflated by this factor before a segment counts as safe.
const WEYL_SAFETY: f64 = 1.5;

/// Minimum squared overlap for two eigenvectors to belong to the same branch.
const OVERLAP_MIN: f64 = 0.7;

/// Interior probe positions (fractions of a segment) tried when a sample has a kernel.
const PROBES: [f64; 7] = [0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowMethod {
    CrossingCount,
    DaiZhang,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub s: f64,
    /// `+1` for a branch moving from negative to positive.
    pub direction: i64,
    /// Branch id from the coarse eigencurves; `None` for the relative-index route.
    pub branch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub crossings: Vec<Crossing>,
    pub sf: i64,
    pub method: FlowMethod,
    /// Deepest bisection level reached.
    pub refinement_depth: usize,
}

/// Both flow routes on one family.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowComparison {
    pub crossing: FlowResult,
    pub dai_zhang: FlowResult,
    pub agree: bool,
}

/// Branch-matched eigenvalue curves.
///
/// `eigenvalues[i]` is the ascending spectrum at `samples[i]` and `branches[i][j]`
/// the branch id of its `j`-th entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigencurves {
    pub samples: Vec<f64>,
    pub eigenvalues: Vec<Vec<f64>>,
    pub branches: Vec<Vec<usize>>,
    pub refinement_depth: usize,
}

impl Eigencurves {
    /// Rows `(s, branch id, lambda)`, ordered by `s` then branch id.
    pub fn rows(&self) -> Vec<(f64, usize, f64)> {
        let mut out = Vec::new();
        for (i, &s) in self.samples.iter().enumerate() {
            let mut row: Vec<(f64, usize, f64)> = self.branches[i]
                .iter()
                .zip(&self.eigenvalues[i])
                .map(|(&b, &l)| (s, b, l))
                .collect();
            row.sort_by_key(|r| r.1);
            out.extend(row);
        }
        out
    }

    /// Curve of branch `b` as `(s, lambda)` pairs.
    pub fn branch(&self, b: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (i, &s) in self.samples.iter().enumerate() {
            if let Some(j) = self.branches[i].iter().position(|&x| x == b) {
                out.push((s, self.eigenvalues[i][j]));
            }
        }
        out
    }
}

fn complete(spec: Arc<SpectralData>) -> Result<Arc<SpectralData>> {
    if !spec.is_complete() {
        return Err(Error::InvalidOperator("spectral flow needs complete decompositions".into()));
    }
    Ok(spec)
}

fn decompose_all(f: &FamilySpec, s: &[f64], solver: &dyn Eigensolver) -> Result<Vec<(BoundaryOperator, Arc<SpectralData>)>> {
    s.par_iter()
        .map(|&s| {
            let op = f.at(s)?;
            let spec = complete(solver.decompose(&op)?)?;
            Ok((op, spec))
        })
        .collect()
}

fn overlaps(a: &SpectralData, b: &SpectralData) -> Vec<Vec<f64>> {
    let m = a.eigenvectors().adjoint() * b.eigenvectors();
    (0..m.nrows()).map(|j| (0..m.ncols()).map(|k| m[(j, k)].norm_sqr()).collect()).collect()
}

/// Clusters of nearly equal eigenvalues, as index ranges.
fn clusters(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=values.len() {
        if j == values.len() || values[j] - values[j - 1] > tol {
            out.push(start..j);
            start = j;
        }
    }
    out
}

/// Assigns each eigenvalue of `b` the position of its partner in `a`, or `None`
/// when the eigenvector overlaps are ambiguous. Degenerate clusters are matched
/// as subspaces, in sorted order within the cluster.
fn match_branches(a: &SpectralData, b: &SpectralData) -> Option<Vec<usize>> {
    let o = overlaps(a, b);
    let n = a.eigenvalues().len();
    let scale = a.eigenvalues().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut partner = vec![usize::MAX; n];
    for c in clusters(a.eigenvalues(), 1e-9 * scale) {
        let weight = |k: usize| c.clone().map(|j| o[j][k]).sum::<f64>();
        let targets: Vec<usize> = (0..n).filter(|&k| weight(k) > OVERLAP_MIN).collect();
        if targets.len() != c.len() {
            return None;
        }
        for (j, &k) in c.clone().zip(&targets) {
            if partner[k] != usize::MAX {
                return None;
            }
            partner[k] = j;
        }
    }
    Some(partner)
}

/// Maximum bisection depth for branch matching on a coarse segment.
const MAX_MATCH_DEPTH: usize = 12;

/// Eigenvalue curves of `f`, refining the s-grid where branch matching fails.
pub fn eigencurves(f: &FamilySpec, solver: &dyn Eigensolver) -> Result<Eigencurves> {
    let coarse = decompose_all(f, f.grid(), solver)?;
    let mut samples = vec![f.grid()[0]];
    let mut specs = vec![coarse[0].1.clone()];
    let mut depth = 0;
    for (i, w) in f.grid().windows(2).enumerate() {
        // Stack of pending right endpoints; refine until each hop matches.
        let mut stack = vec![(w[1], coarse[i + 1].1.clone(), 0usize)];
        while let Some((s, spec, d)) = stack.pop() {
            let left = specs.last().unwrap();
            if match_branches(left, &spec).is_some() {
                samples.push(s);
                specs.push(spec);
                continue;
            }
            let s0 = *samples.last().unwrap();
            if d >= MAX_MATCH_DEPTH {
                return Err(Error::BranchAmbiguity { s: 0.5 * (s0 + s) });
            }
            let m = 0.5 * (s0 + s);
            let mid = complete(solver.decompose(&f.at(m)?)?)?;
            depth = depth.max(d + 1);
            stack.push((s, spec, d + 1));
            stack.push((m, mid, d + 1));
        }
    }
    let n = specs[0].eigenvalues().len();
    let mut branches = vec![(0..n).collect::<Vec<_>>()];
    for w in specs.windows(2) {
        let partner = match_branches(&w[0], &w[1]).expect("matched during refinement");
        let prev = branches.last().unwrap();
        branches.push(partner.iter().map(|&j| prev[j]).collect());
    }
    Ok(Eigencurves {
        samples,
        eigenvalues: specs.iter().map(|s| s.eigenvalues().to_vec()).collect(),
        branches,
        refinement_depth: depth,
    })
}

/// A decomposed family member.
struct Sample {
    s: f64,
    op: BoundaryOperator,
    spec: Arc<SpectralData>,
}

impl Sample {
    fn invertible(&self) -> bool {
        self.spec.kernel_dim() == 0
    }

    fn negatives(&self) -> usize {
        self.spec.eigenvalues().iter().filter(|&&l| l < 0.0).count()
    }
}

struct Walker<'a> {
    f: &'a FamilySpec,
    solver: &'a dyn Eigensolver,
    depth: usize,
}

impl Walker<'_> {
    fn sample(&self, s: f64) -> Result<Sample> {
        let op = self.f.at(s)?;
        let spec = complete(self.solver.decompose(&op)?)?;
        Ok(Sample { s, op, spec })
    }

    /// Invertible member strictly inside `(a, b)`.
    fn probe(&self, a: f64, b: f64) -> Result<Sample> {
        for t in PROBES {
            let x = self.sample(a + t * (b - a))?;
            if x.invertible() {
                return Ok(x);
            }
        }
        Err(Error::PinnedZero { s0: a, s1: b })
    }

    /// Coarse samples with interior kernels dropped; endpoints must be invertible.
    fn coarse(&self) -> Result<Vec<Sample>> {
        let all = decompose_all(self.f, self.f.grid(), self.solver)?;
        let grid = self.f.grid();
        let mut out = Vec::new();
        for (i, (op, spec)) in all.into_iter().enumerate() {
            let x = Sample { s: grid[i], op, spec };
            let end = i == 0 || i == grid.len() - 1;
            if !x.invertible() {
                if end {
                    return Err(Error::EndpointKernel {
                        s: x.s,
                        dim: x.spec.kernel_dim(),
                    });
                }
                continue;
            }
            out.push(x);
        }
        Ok(out)
    }
}

fn weyl_width(a: &Sample, b: &Sample) -> Result<f64> {
    Ok(WEYL_SAFETY * b.op.matrix().sub(a.op.matrix())?.norm_inf())
}

/// Sorted indices whose eigenvalue might vanish somewhere on the segment.
fn suspicious(a: &Sample, b: &Sample, w: f64) -> Vec<usize> {
    let (la, lb) = (a.spec.eigenvalues(), b.spec.eigenvalues());
    (0..la.len())
        .filter(|&j| la[j].signum() != lb[j].signum() || la[j].abs() + lb[j].abs() <= w)
        .collect()
}

impl Walker<'_> {
    fn count(&mut self, a: &Sample, b: &Sample, depth: usize, out: &mut Vec<(f64, i64, usize)>) -> Result<()> {
        self.depth = self.depth.max(depth);
        let w = weyl_width(a, b)?;
        let sus = suspicious(a, b, w);
        if sus.is_empty() {
            return Ok(());
        }
        if b.s - a.s <= CROSSING_WIDTH {
            // Isolated: the net change of the negative count is the crossing.
            let net = a.negatives() as i64 - b.negatives() as i64;
            let dir = net.signum();
            let first = a.negatives().min(b.negatives());
            for k in 0..net.unsigned_abs() as usize {
                out.push((0.5 * (a.s + b.s), dir, first + k));
            }
            return Ok(());
        }
        let m = self.probe(a.s, b.s)?;
        self.count(a, &m, depth + 1, out)?;
        self.count(&m, b, depth + 1, out)
    }

    /// Level in a spectral gap of every member on the segment, nearest to 0.
    fn gap_level(a: &Sample, w: f64) -> Option<f64> {
        let l = a.spec.eigenvalues();
        l.windows(2)
            .filter(|g| 0.5 * (g[1] - g[0]) > w)
            .map(|g| 0.5 * (g[0] + g[1]))
            .min_by(|x, y| x.abs().total_cmp(&y.abs()))
    }

    fn sections(&mut self, a: &Sample, b: &Sample, depth: usize, out: &mut Vec<(f64, i64)>) -> Result<()> {
        self.depth = self.depth.max(depth);
        let w = weyl_width(a, b)?;
        let level = match Self::gap_level(a, w) {
            Some(mu) => mu,
            None if b.s - a.s > CROSSING_WIDTH => {
                let m = self.probe(a.s, b.s)?;
                self.sections(a, &m, depth + 1, out)?;
                return self.sections(&m, b, depth + 1, out);
            }
            // Below the whole spectrum is always a common gap.
            None => a.spec.eigenvalues()[0] - w - 1.0,
        };
        let term = |x: &Sample| -> Result<i64> {
            let section = x.spec.columns(&x.spec.indices_in(&SpectralInterval::below(level))?);
            let aps = x.spec.columns(&x.spec.indices_in(&SpectralInterval::below(0.0))?);
            crate::bvp::relative_index(&section, &aps)
        };
        let contribution = term(b)? - term(a)?;
        if contribution != 0 {
            out.push((0.5 * (a.s + b.s), contribution));
        }
        Ok(())
    }
}

/// Spectral flow of `f`; a branch moving from negative to positive counts `+1`.
///
/// `CrossingCount` bisects every segment on which a sorted eigenvalue can reach 0
/// (by the Weyl bound `|lambda_j(a)| + |lambda_j(b)| <= ||A^b - A^a||`) until it is
/// isolated in an interval of width [`CROSSING_WIDTH`]. `DaiZhang` picks a gap
/// level per segment and sums relative indices of the resulting piecewise
/// spectral section against the APS subspaces.
pub fn spectral_flow(f: &FamilySpec, method: FlowMethod, solver: &dyn Eigensolver) -> Result<FlowResult> {
    let mut walker = Walker { f, solver, depth: 0 };
    let coarse = walker.coarse()?;
    let crossings = match method {
        FlowMethod::CrossingCount => {
            let curves = branch_labels(f, solver);
            let mut raw = Vec::new();
            for w in coarse.windows(2) {
                let before = raw.len();
                walker.count(&w[0], &w[1], 0, &mut raw)?;
                let labels = curves.as_ref().and_then(|c| labels_at(c, w[0].s));
                for r in &mut raw[before..] {
                    r.2 = labels.as_ref().and_then(|l| l.get(r.2).copied()).unwrap_or(usize::MAX);
                }
            }
            raw.into_iter()
                .map(|(s, direction, b)| Crossing {
                    s,
                    direction,
                    branch: (b != usize::MAX).then_some(b),
                })
                .collect()
        }
        FlowMethod::DaiZhang => {
            let mut raw = Vec::new();
            for w in coarse.windows(2) {
                walker.sections(&w[0], &w[1], 0, &mut raw)?;
            }
            raw.into_iter()
                .flat_map(|(s, c)| {
                    std::iter::repeat(Crossing {
                        s,
                        direction: c.signum(),
                        branch: None,
                    })
                    .take(c.unsigned_abs() as usize)
                })
                .collect()
        }
    };
    let crossings: Vec<Crossing> = crossings;
    Ok(FlowResult {
        sf: crossings.iter().map(|c| c.direction).sum(),
        crossings,
        method,
        refinement_depth: walker.depth,
    })
}

/// Branch labels are cosmetic; a family whose curves cannot be matched still
/// gets a flow, just without branch ids.
fn branch_labels(f: &FamilySpec, solver: &dyn Eigensolver) -> Option<Eigencurves> {
    eigencurves(f, solver).ok()
}

fn labels_at(c: &Eigencurves, s: f64) -> Option<Vec<usize>> {
    c.samples.iter().position(|&x| x == s).map(|i| c.branches[i].clone())
}

/// Runs both routes.
pub fn spectral_flow_both(f: &FamilySpec, solver: &dyn Eigensolver) -> Result<FlowComparison> {
    let crossing = spectral_flow(f, FlowMethod::CrossingCount, solver)?;
    let dai_zhang = spectral_flow(f, FlowMethod::DaiZhang, solver)?;
    let agree = crossing.sf == dai_zhang.sf;
    Ok(FlowComparison {
        crossing,
        dai_zhang,
        agree,
    })
}
