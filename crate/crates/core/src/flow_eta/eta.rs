use super::family::FamilySpec;
use super::flow::{spectral_flow_both, FlowComparison};
use crate::bvp::{aps_condition, assemble_bvp, compute_index, dual_aps_condition, IndexOptions, IndexReport, Side};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ops::{BoundaryOperator, CylinderOperator};
use crate::spectral::{Eigensolver, SpectralData};

/// Intervals of the default cobordism.
pub const COBORDISM_INTERVALS: usize = 9;

/// Intervals of the second, independently discretized cobordism.
pub const SECOND_COBORDISM_INTERVALS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatOptions {
    /// Absolute error target of the quadrature on `[0, 1]`.
    pub tol: f64,
}

impl Default for HeatOptions {
    fn default() -> Self {
        Self { tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaOptions {
    pub index: IndexOptions,
    pub intervals: usize,
    /// Recompute over a second cobordism with this many intervals.
    pub second_intervals: Option<usize>,
    pub heat: Option<HeatOptions>,
}

impl Default for EtaOptions {
    fn default() -> Self {
        Self {
            index: IndexOptions::default(),
            intervals: COBORDISM_INTERVALS,
            second_intervals: Some(SECOND_COBORDISM_INTERVALS),
            heat: None,
        }
    }
}

/// Relative eta `eta(A1, A0)` from a cobordism running from `A0` to `A1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaReport {
    pub eta: i64,
    pub index: i64,
    pub dim_ker_a0: usize,
    pub dim_ker_a1: usize,
    /// `2 ind' - dim ker A0 - dim ker A1` with the dual APS conditions.
    pub dual_route: i64,
    /// Same quantity over a second cobordism.
    pub second_cobordism: Option<i64>,
    pub heat_route: Option<f64>,
    pub zero_tol_a0: f64,
    pub zero_tol_a1: f64,
    pub rank_tol: f64,
    pub index_report: IndexReport,
    pub dual_report: IndexReport,
}

impl EtaReport {
    pub fn routes_agree(&self) -> bool {
        self.dual_route == self.eta && self.second_cobordism.map_or(true, |e| e == self.eta)
    }

    /// `eta = dim ker A0 + dim ker A1 (mod 2)`.
    pub fn parity_holds(&self) -> bool {
        (self.eta - (self.dim_ker_a0 + self.dim_ker_a1) as i64).rem_euclid(2) == 0
    }

    pub fn consistent(&self) -> bool {
        self.routes_agree() && self.parity_holds() && self.index_report.consistent && self.dual_report.consistent
    }
}

/// The interpolating cobordism from `a0` to `a1` on a grid resolving both.
pub fn default_cobordism(a0: &BoundaryOperator, a1: &BoundaryOperator, intervals: usize) -> Result<CylinderOperator> {
    check_cobordant(a0, a1)?;
    let bound = a0.norm_bound().max(a1.norm_bound());
    Ok(CylinderOperator::interpolating(a0, a1, TimeGrid::resolving(intervals, bound)?)?.with_label("cobordism"))
}

fn check_cobordant(a0: &BoundaryOperator, a1: &BoundaryOperator) -> Result<()> {
    if a0.slice() != a1.slice() {
        return Err(Error::NonCobordant(format!(
            "'{}' and '{}' live on different slices",
            a0.label(),
            a1.label()
        )));
    }
    Ok(())
}

struct Ends<'a> {
    s0: &'a SpectralData,
    s1: &'a SpectralData,
}

impl Ends<'_> {
    /// `(2 ind + k0 + k1, 2 ind' - k0 - k1)` over `d`.
    fn routes(&self, d: &CylinderOperator, opts: &IndexOptions) -> Result<(IndexReport, IndexReport)> {
        let b0 = aps_condition(self.s0, 0.0, Side::Left)?;
        let b1 = aps_condition(self.s1, 0.0, Side::Right)?;
        let plain = compute_index(&assemble_bvp(d, &b0, &b1)?, opts)?;
        if self.kernels() == 0 {
            // Without kernels the dual conditions are the same subspaces.
            return Ok((plain.clone(), plain));
        }
        let b0 = dual_aps_condition(self.s0, 0.0, Side::Left)?;
        let b1 = dual_aps_condition(self.s1, 0.0, Side::Right)?;
        let dual = compute_index(&assemble_bvp(d, &b0, &b1)?, opts)?;
        Ok((plain, dual))
    }

    fn kernels(&self) -> i64 {
        (self.s0.kernel_dim() + self.s1.kernel_dim()) as i64
    }
}

/// Relative eta invariant `eta(A1, A0) = 2 ind D_{B0 + B1} + dim ker A0 + dim ker A1`
/// with `B0` the APS subspace of `A0` and `B1` the positive spectral subspace of
/// `A1` (the APS condition of the restriction `-A1`).
///
/// `cobordism` defaults to [`default_cobordism`]; a supplied one must restrict to
/// `a0` on the left and `a1` on the right.
pub fn relative_eta(
    a0: &BoundaryOperator,
    a1: &BoundaryOperator,
    cobordism: Option<&CylinderOperator>,
    solver: &dyn Eigensolver,
    opts: &EtaOptions,
) -> Result<EtaReport> {
    check_cobordant(a0, a1)?;
    let own;
    let d = match cobordism {
        Some(d) => {
            if d.left_operator() != a0 || d.right_operator() != a1 {
                return Err(Error::IncompatibleGlue(format!(
                    "cobordism '{}' does not restrict to the given end operators",
                    d.label()
                )));
            }
            d
        }
        None => {
            own = default_cobordism(a0, a1, opts.intervals)?;
            &own
        }
    };
    let s0 = solver.decompose(a0)?;
    let s1 = if a1 == a0 { s0.clone() } else { solver.decompose(a1)? };
    let ends = Ends { s0: &s0, s1: &s1 };
    let (plain, dual) = ends.routes(d, &opts.index)?;
    let eta = 2 * plain.index + ends.kernels();
    let dual_route = 2 * dual.index - ends.kernels();
    let second_cobordism = match opts.second_intervals {
        Some(k) => {
            let d2 = default_cobordism(a0, a1, k)?;
            let b0 = aps_condition(&s0, 0.0, Side::Left)?;
            let b1 = aps_condition(&s1, 0.0, Side::Right)?;
            Some(2 * compute_index(&assemble_bvp(&d2, &b0, &b1)?, &opts.index)?.index + ends.kernels())
        }
        None => None,
    };
    let heat_route = match opts.heat {
        Some(h) => Some(relative_eta_heat(&s0, &s1, h)?),
        None => None,
    };
    Ok(EtaReport {
        eta,
        index: plain.index,
        dim_ker_a0: s0.kernel_dim(),
        dim_ker_a1: s1.kernel_dim(),
        dual_route,
        second_cobordism,
        heat_route,
        zero_tol_a0: s0.zero_tol(),
        zero_tol_a1: s1.zero_tol(),
        rank_tol: plain.rank_tol,
        index_report: plain,
        dual_report: dual,
    })
}

fn signed_modes(spec: &SpectralData) -> impl Iterator<Item = f64> + '_ {
    let tol = spec.zero_tol();
    spec.eigenvalues().iter().copied().filter(move |l| l.abs() > tol)
}

/// Heat-trace value `eta(0; A1, A0)`.
///
/// Integrates `t^{-1/2} Tr(A1 e^{-t A1^2} - A0 e^{-t A0^2}) / Gamma(1/2)` over
/// `(0, 1]` by double-exponential quadrature after `t = x^2`, and adds the tail
/// over `[1, inf)` in closed form, `sign(lambda) sqrt(pi) erfc(|lambda|)` per mode.
pub fn relative_eta_heat(s0: &SpectralData, s1: &SpectralData, opts: HeatOptions) -> Result<f64> {
    if !s0.is_complete() || !s1.is_complete() {
        return Err(Error::InvalidOperator("heat route needs complete decompositions".into()));
    }
    if s0.dim() != s1.dim() {
        return Err(Error::ShapeMismatch("heat route compares operators on one truncation".into()));
    }
    let trace = |t: f64, spec: &SpectralData| signed_modes(spec).map(|l| l * (-t * l * l).exp()).sum::<f64>();
    let head = quadrature::double_exponential::integrate(|x| 2.0 * (trace(x * x, s1) - trace(x * x, s0)), 0.0, 1.0, opts.tol);
    if !head.integral.is_finite() || head.error_estimate > opts.tol.max(1e-14) * 1e3 {
        return Err(Error::Quadrature(format!(
            "error estimate {:e} above target {:e}",
            head.error_estimate, opts.tol
        )));
    }
    let tail = |spec: &SpectralData| signed_modes(spec).map(|l| l.signum() * libm::erfc(l.abs())).sum::<f64>();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    Ok(head.integral / sqrt_pi + tail(s1) - tail(s0))
}

/// Antisymmetry and cocycle on a triple.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaProperties {
    /// `eta(A1, A0)`, `eta(A0, A1)`, `eta(A2, A1)`, `eta(A2, A0)`.
    pub eta_10: i64,
    pub eta_01: i64,
    pub eta_21: i64,
    pub eta_20: i64,
    pub antisymmetric: bool,
    pub cocycle: bool,
    pub reports_consistent: bool,
}

impl EtaProperties {
    pub fn holds(&self) -> bool {
        self.antisymmetric && self.cocycle && self.reports_consistent
    }
}

pub fn eta_properties(
    a0: &BoundaryOperator,
    a1: &BoundaryOperator,
    a2: &BoundaryOperator,
    solver: &dyn Eigensolver,
    opts: &EtaOptions,
) -> Result<EtaProperties> {
    check_cobordant(a0, a1)?;
    check_cobordant(a1, a2)?;
    let eta = |x, y| relative_eta(x, y, None, solver, opts);
    let (r10, r01, r21, r20) = (eta(a0, a1)?, eta(a1, a0)?, eta(a1, a2)?, eta(a0, a2)?);
    Ok(EtaProperties {
        eta_10: r10.eta,
        eta_01: r01.eta,
        eta_21: r21.eta,
        eta_20: r20.eta,
        antisymmetric: r01.eta == -r10.eta,
        cocycle: r20.eta == r21.eta + r10.eta,
        reports_consistent: [&r10, &r01, &r21, &r20].iter().all(|r| r.consistent()),
    })
}

/// Verdict of `eta(A^1, A^0) = 2 sf`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaFlowVerdict {
    pub eta: EtaReport,
    pub flow: FlowComparison,
    /// `eta(A^1, A_ref) - eta(A^0, A_ref)` when a reference was supplied.
    pub reference_difference: Option<i64>,
    pub holds: bool,
}

/// Builds the cobordism along the family, computes both sides and compares.
pub fn check_eta_equals_2sf(
    f: &FamilySpec,
    reference: Option<&BoundaryOperator>,
    solver: &dyn Eigensolver,
    opts: &EtaOptions,
) -> Result<EtaFlowVerdict> {
    let (a0, a1) = (f.at(0.0)?, f.at(1.0)?);
    let bound = f.grid().iter().map(|&s| f.at(s).map(|a| a.norm_bound())).try_fold(0.0f64, |m, b| b.map(|b| m.max(b)))?;
    let d = CylinderOperator::along_family(|s| f.at(s), TimeGrid::resolving(opts.intervals, bound)?)?;
    let eta = relative_eta(&a0, &a1, Some(&d), solver, opts)?;
    let flow = spectral_flow_both(f, solver)?;
    let reference_difference = match reference {
        Some(r) => {
            let no_extra = EtaOptions { second_intervals: None, heat: None, ..*opts };
            let e1 = relative_eta(r, &a1, None, solver, &no_extra)?;
            let e0 = relative_eta(r, &a0, None, solver, &no_extra)?;
            Some(e1.eta - e0.eta)
        }
        None => None,
    };
    let sf2 = 2 * flow.crossing.sf;
    let holds = flow.agree && eta.consistent() && eta.eta == sf2 && reference_difference.map_or(true, |d| d == sf2);
    Ok(EtaFlowVerdict {
        eta,
        flow,
        reference_difference,
        holds,
    })
}
