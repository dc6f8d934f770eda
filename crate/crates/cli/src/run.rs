//! Run orchestration: computes every result of a scenario, then emits reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use callias_core::bvp::{
    adjoint_bvp, aps_condition, assemble_bvp, check_condition_change, check_splitting, compute_index,
    dual_aps_condition, ConditionChangeVerdict, IndexOptions, IndexReport, IndexRoute, Side, SplittingVerdict,
};
use callias_core::flow_eta::{
    check_eta_equals_2sf, default_cobordism, eigencurves, eta_properties, relative_eta, relative_eta_heat,
    spectral_flow, spectral_flow_both, EtaOptions, EtaReport, FlowComparison, FlowMethod, FlowResult, HeatOptions,
};
use callias_core::ops::BoundaryOperator;
use callias_core::spectral::{Eigensolver, SpectralData};
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::{CacheStats, Mode, SpectralCache};
use crate::config::{CaseDef, ConditionKind, MethodDef, RunConfig, Scenario};
use crate::error::CliError;
use crate::report::{eigencurves_csv, nums, spectrum_csv, Num, Outputs, CSV_SCHEMA, REPORT_SCHEMA};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Flags that override or extend the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; the config value or the rayon default otherwise.
    pub workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    /// Suite cases to run; all when empty.
    pub suite: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub outputs: Outputs,
    /// Conjunction of all suite verdicts; `None` outside suite mode.
    pub all_hold: Option<bool>,
    pub stats: CacheStats,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.all_hold == Some(false) {
            1
        } else {
            0
        }
    }

    pub fn report(&self) -> &[u8] {
        self.outputs.get(REPORT_FILE).expect("every run writes a report")
    }
}

/// Eigensolver view of the cache with the configured kernel threshold.
struct Solver<'a> {
    cache: &'a SpectralCache,
    zero_tol: Option<f64>,
}

impl Eigensolver for Solver<'_> {
    fn decompose(&self, op: &BoundaryOperator) -> callias_core::Result<Arc<SpectralData>> {
        let spec = self.cache.decompose(op)?;
        Ok(match self.zero_tol {
            Some(t) => Arc::new((*spec).clone().with_zero_tol(t)),
            None => spec,
        })
    }
}

#[derive(Serialize)]
struct IndexJson {
    dim_ker: usize,
    dim_coker: usize,
    index: i64,
    counting_index: i64,
    rank_tol: Num,
    sv_gap: Option<Num>,
    consistent: bool,
    route: &'static str,
}

fn route_name(r: IndexRoute) -> &'static str {
    match r {
        IndexRoute::Dense => "dense_svd",
        IndexRoute::Transfer => "transfer",
        IndexRoute::Auto => "auto",
    }
}

impl From<&IndexReport> for IndexJson {
    fn from(r: &IndexReport) -> Self {
        Self {
            dim_ker: r.dim_ker,
            dim_coker: r.dim_coker,
            index: r.index,
            counting_index: r.counting_index,
            rank_tol: Num(r.rank_tol),
            sv_gap: r.sv_gap.map(Num),
            consistent: r.consistent,
            route: route_name(r.route),
        }
    }
}

#[derive(Serialize)]
struct SpectrumJson {
    operator: String,
    dim: usize,
    computed: usize,
    complete: bool,
    window_radius: Option<Num>,
    kernel_dim: usize,
    negative_count: Option<usize>,
    zero_tol: Num,
    smallest_abs: Vec<Num>,
    csv: String,
}

#[derive(Serialize)]
struct CrossingJson {
    s: Num,
    direction: i64,
    branch: Option<usize>,
}

#[derive(Serialize)]
struct FlowJson {
    method: &'static str,
    sf: i64,
    refinement_depth: usize,
    crossings: Vec<CrossingJson>,
}

impl From<&FlowResult> for FlowJson {
    fn from(r: &FlowResult) -> Self {
        Self {
            method: match r.method {
                FlowMethod::CrossingCount => "crossing_count",
                FlowMethod::DaiZhang => "dai_zhang",
            },
            sf: r.sf,
            refinement_depth: r.refinement_depth,
            crossings: r
                .crossings
                .iter()
                .map(|c| CrossingJson {
                    s: Num(c.s),
                    direction: c.direction,
                    branch: c.branch,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct ComparisonJson {
    agree: bool,
    crossing_count: FlowJson,
    dai_zhang: FlowJson,
}

impl From<&FlowComparison> for ComparisonJson {
    fn from(c: &FlowComparison) -> Self {
        Self {
            agree: c.agree,
            crossing_count: (&c.crossing).into(),
            dai_zhang: (&c.dai_zhang).into(),
        }
    }
}

#[derive(Serialize)]
struct EtaJson {
    a0: String,
    a1: String,
    eta: i64,
    index: i64,
    dim_ker_a0: usize,
    dim_ker_a1: usize,
    dual_route: i64,
    second_cobordism: Option<i64>,
    heat_route: Option<Num>,
    zero_tol_a0: Num,
    zero_tol_a1: Num,
    routes_agree: bool,
    parity_holds: bool,
    consistent: bool,
    aps_index: IndexJson,
    dual_aps_index: IndexJson,
}

fn eta_json(a0: &str, a1: &str, r: &EtaReport) -> EtaJson {
    EtaJson {
        a0: a0.into(),
        a1: a1.into(),
        eta: r.eta,
        index: r.index,
        dim_ker_a0: r.dim_ker_a0,
        dim_ker_a1: r.dim_ker_a1,
        dual_route: r.dual_route,
        second_cobordism: r.second_cobordism,
        heat_route: r.heat_route.map(Num),
        zero_tol_a0: Num(r.zero_tol_a0),
        zero_tol_a1: Num(r.zero_tol_a1),
        routes_agree: r.routes_agree(),
        parity_holds: r.parity_holds(),
        consistent: r.consistent(),
        aps_index: (&r.index_report).into(),
        dual_aps_index: (&r.dual_report).into(),
    }
}

fn eta_routes(r: &EtaReport) -> Vec<String> {
    let mut v = vec![
        format!("aps_index/{}", route_name(r.index_report.route)),
        format!("dual_aps_index/{}", route_name(r.dual_report.route)),
    ];
    if r.second_cobordism.is_some() {
        v.push("second_cobordism".into());
    }
    if r.heat_route.is_some() {
        v.push("heat_trace_quadrature".into());
    }
    v
}

#[derive(Serialize)]
struct ChangeJson {
    a: Num,
    b: Num,
    count: usize,
    index_a: IndexJson,
    index_b: IndexJson,
}

impl From<&ConditionChangeVerdict> for ChangeJson {
    fn from(v: &ConditionChangeVerdict) -> Self {
        Self {
            a: Num(v.a),
            b: Num(v.b),
            count: v.count,
            index_a: (&v.index_a).into(),
            index_b: (&v.index_b).into(),
        }
    }
}

#[derive(Serialize)]
struct SplitJson {
    cut: usize,
    holds: bool,
    uncut: IndexJson,
    left: IndexJson,
    right: IndexJson,
    transmission: IndexJson,
}

impl From<&SplittingVerdict> for SplitJson {
    fn from(v: &SplittingVerdict) -> Self {
        Self {
            cut: v.cut,
            holds: v.holds,
            uncut: (&v.uncut).into(),
            left: (&v.left).into(),
            right: (&v.right).into(),
            transmission: (&v.transmission).into(),
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum Detail {
    Eta(EtaJson),
    Properties {
        eta_10: i64,
        eta_01: i64,
        eta_21: i64,
        eta_20: i64,
        antisymmetric: bool,
        cocycle: bool,
        reports_consistent: bool,
    },
    EtaFlow {
        eta: EtaJson,
        flow: ComparisonJson,
        reference_difference: Option<i64>,
    },
    Flow(ComparisonJson),
    Heat {
        value: Num,
        expect: Num,
        tol: Num,
    },
    Adjoint {
        index: IndexJson,
        adjoint: IndexJson,
    },
    Change(ChangeJson),
    Splitting {
        cuts: Vec<SplitJson>,
    },
}

#[derive(Serialize)]
struct CaseJson {
    name: String,
    check: &'static str,
    holds: bool,
    detail: Detail,
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    schema: u32,
    scenario: &'static str,
    #[serde(flatten)]
    body: T,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    solver: Solver<'a>,
    cache: &'a SpectralCache,
    index: IndexOptions,
}

impl Ctx<'_> {
    fn eta_options(&self, intervals: usize, heat: bool) -> EtaOptions {
        EtaOptions {
            index: self.index,
            intervals,
            heat: heat.then(HeatOptions::default),
            ..EtaOptions::default()
        }
    }

    fn op(&self, name: &str) -> Result<&BoundaryOperator, CliError> {
        self.cfg.operator(name)
    }
}

type Provenance = BTreeMap<String, Vec<String>>;

fn spectrum_entries(ctx: &Ctx, out: &mut Outputs, prov: &mut Provenance) -> Result<Vec<SpectrumJson>, CliError> {
    let sec = ctx.cfg.file.spectrum.as_ref().expect("validated");
    let mode = sec.window.map_or(Mode::Dense, Mode::Window);
    let specs: Vec<Arc<SpectralData>> = sec
        .operators
        .par_iter()
        .map(|name| {
            let spec = ctx.cache.get(ctx.op(name)?, mode).map_err(|e| CliError::from(e).context(format!("operator '{name}'")))?;
            Ok(match ctx.cfg.file.tolerances.zero_tol {
                Some(t) => Arc::new((*spec).clone().with_zero_tol(t)),
                None => spec,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut entries = Vec::new();
    for (name, spec) in sec.operators.iter().zip(&specs) {
        let csv = format!("spectrum_{name}.csv");
        out.add(csv.clone(), spectrum_csv(spec.eigenvalues(), spec.residuals())?);
        let mut abs: Vec<f64> = spec.eigenvalues().iter().map(|l| l.abs()).collect();
        abs.sort_by(f64::total_cmp);
        abs.truncate(5);
        entries.push(SpectrumJson {
            operator: name.clone(),
            dim: spec.dim(),
            computed: spec.eigenvalues().len(),
            complete: spec.is_complete(),
            window_radius: spec.window().map(|w| Num(w.radius)),
            kernel_dim: spec.kernel_dim(),
            negative_count: spec.negative_count().ok(),
            zero_tol: Num(spec.zero_tol()),
            smallest_abs: nums(&abs),
            csv,
        });
        let route = match mode {
            Mode::Dense => "dense_hermitian_eigen",
            Mode::Window(_) => "shift_invert_window_with_inertia",
        };
        prov.insert(format!("spectrum/{name}"), vec![route.into()]);
    }
    Ok(entries)
}

fn index(ctx: &Ctx, prov: &mut Provenance) -> Result<IndexBody, CliError> {
    let sec = ctx.cfg.file.index.as_ref().expect("validated");
    let (a0, a1) = (ctx.op(&sec.from)?, ctx.op(&sec.to)?);
    let d = default_cobordism(a0, a1, sec.intervals)?;
    let s0 = ctx.solver.decompose(a0)?;
    let s1 = ctx.solver.decompose(a1)?;
    let cond = |spec: &SpectralData, kind, cut, side| match kind {
        ConditionKind::Aps => aps_condition(spec, cut, side),
        ConditionKind::DualAps => dual_aps_condition(spec, cut, side),
    };
    let b0 = cond(&s0, sec.left, sec.left_cut, Side::Left)?;
    let b1 = cond(&s1, sec.right, sec.right_cut, Side::Right)?;
    let problem = assemble_bvp(&d, &b0, &b1)?;
    let opts = IndexOptions {
        route: sec.route.into(),
        ..ctx.index
    };
    let main = compute_index(&problem, &opts)?;
    prov.insert("index".into(), vec![route_name(main.route).into()]);
    let adjoint = if sec.adjoint {
        let r = compute_index(&adjoint_bvp(&problem)?, &opts)?;
        prov.insert("adjoint_index".into(), vec![route_name(r.route).into()]);
        Some((&r).into())
    } else {
        None
    };
    Ok(IndexBody {
        from: sec.from.clone(),
        to: sec.to.clone(),
        intervals: sec.intervals,
        index: (&main).into(),
        adjoint,
    })
}

#[derive(Serialize)]
struct IndexBody {
    from: String,
    to: String,
    intervals: usize,
    index: IndexJson,
    adjoint: Option<IndexJson>,
}

#[derive(Serialize)]
struct FlowBody {
    family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    flow: Option<FlowJson>,
    eigencurves: Option<String>,
}

fn flow(ctx: &Ctx, out: &mut Outputs, prov: &mut Provenance) -> Result<FlowBody, CliError> {
    let sec = ctx.cfg.file.flow.as_ref().expect("validated");
    let f = ctx.cfg.family(&sec.family)?;
    let (comparison, single) = match sec.method {
        MethodDef::Both => (Some((&spectral_flow_both(f, &ctx.solver)?).into()), None),
        MethodDef::CrossingCount => (None, Some((&spectral_flow(f, FlowMethod::CrossingCount, &ctx.solver)?).into())),
        MethodDef::DaiZhang => (None, Some((&spectral_flow(f, FlowMethod::DaiZhang, &ctx.solver)?).into())),
    };
    let routes = match sec.method {
        MethodDef::Both => vec!["crossing_count", "dai_zhang"],
        MethodDef::CrossingCount => vec!["crossing_count"],
        MethodDef::DaiZhang => vec!["dai_zhang"],
    };
    prov.insert("flow".into(), routes.into_iter().map(String::from).collect());
    let eigencurves = if sec.curves {
        let curves = eigencurves(f, &ctx.solver)?;
        out.add("eigencurves.csv", eigencurves_csv(&curves.rows())?);
        prov.insert("eigencurves".into(), vec!["overlap_branch_matching".into()]);
        Some("eigencurves.csv".to_string())
    } else {
        None
    };
    Ok(FlowBody {
        family: sec.family.clone(),
        comparison,
        flow: single,
        eigencurves,
    })
}

fn eta(ctx: &Ctx, prov: &mut Provenance) -> Result<Vec<EtaJson>, CliError> {
    let sec = ctx.cfg.file.eta.as_ref().expect("validated");
    let opts = ctx.eta_options(sec.intervals, sec.heat);
    let reports: Vec<EtaReport> = sec
        .pairs
        .par_iter()
        .map(|[a, b]| {
            relative_eta(ctx.op(a)?, ctx.op(b)?, None, &ctx.solver, &opts)
                .map_err(|e| CliError::from(e).context(format!("pair ({a}, {b})")))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(sec
        .pairs
        .iter()
        .zip(&reports)
        .map(|([a, b], r)| {
            prov.insert(format!("eta/{a}/{b}"), eta_routes(r));
            eta_json(a, b, r)
        })
        .collect())
}

fn case_check(case: &CaseDef) -> &'static str {
    match case {
        CaseDef::Eta { .. } => "eta",
        CaseDef::EtaProperties { .. } => "eta_properties",
        CaseDef::EtaFlow { .. } => "eta_flow",
        CaseDef::Flow { .. } => "flow",
        CaseDef::Heat { .. } => "heat",
        CaseDef::Adjoint { .. } => "adjoint",
        CaseDef::ConditionChange { .. } => "condition_change",
        CaseDef::Splitting { .. } => "splitting",
    }
}

fn run_case(ctx: &Ctx, case: &CaseDef) -> Result<(bool, Detail, Vec<String>), CliError> {
    let opts = ctx.eta_options(callias_core::flow_eta::COBORDISM_INTERVALS, false);
    Ok(match case {
        CaseDef::Eta { a0, a1, expect } => {
            let r = relative_eta(ctx.op(a0)?, ctx.op(a1)?, None, &ctx.solver, &opts)?;
            let holds = r.consistent() && expect.map_or(true, |e| e == r.eta);
            (holds, Detail::Eta(eta_json(a0, a1, &r)), eta_routes(&r))
        }
        CaseDef::EtaProperties { a0, a1, a2 } => {
            let p = eta_properties(ctx.op(a0)?, ctx.op(a1)?, ctx.op(a2)?, &ctx.solver, &opts)?;
            (
                p.holds(),
                Detail::Properties {
                    eta_10: p.eta_10,
                    eta_01: p.eta_01,
                    eta_21: p.eta_21,
                    eta_20: p.eta_20,
                    antisymmetric: p.antisymmetric,
                    cocycle: p.cocycle,
                    reports_consistent: p.reports_consistent,
                },
                vec!["aps_index".into(), "dual_aps_index".into(), "second_cobordism".into()],
            )
        }
        CaseDef::EtaFlow { family, reference } => {
            let f = ctx.cfg.family(family)?;
            let r = reference.as_deref().map(|r| ctx.op(r)).transpose()?;
            let v = check_eta_equals_2sf(f, r, &ctx.solver, &opts)?;
            let (a0, a1) = (format!("{family}@0"), format!("{family}@1"));
            let mut routes = eta_routes(&v.eta);
            routes.extend(["crossing_count".into(), "dai_zhang".into()]);
            (
                v.holds,
                Detail::EtaFlow {
                    eta: eta_json(&a0, &a1, &v.eta),
                    flow: (&v.flow).into(),
                    reference_difference: v.reference_difference,
                },
                routes,
            )
        }
        CaseDef::Flow { family, expect } => {
            let c = spectral_flow_both(ctx.cfg.family(family)?, &ctx.solver)?;
            let holds = c.agree && expect.map_or(true, |e| e == c.crossing.sf);
            (holds, Detail::Flow((&c).into()), vec!["crossing_count".into(), "dai_zhang".into()])
        }
        CaseDef::Heat { a0, a1, expect, tol } => {
            let s0 = ctx.solver.decompose(ctx.op(a0)?)?;
            let s1 = ctx.solver.decompose(ctx.op(a1)?)?;
            let value = relative_eta_heat(&s0, &s1, HeatOptions::default())?;
            (
                (value - expect).abs() <= *tol,
                Detail::Heat {
                    value: Num(value),
                    expect: Num(*expect),
                    tol: Num(*tol),
                },
                vec!["heat_trace_quadrature".into()],
            )
        }
        CaseDef::Adjoint {
            from,
            to,
            left_cut,
            right_cut,
            intervals,
        } => {
            let (a0, a1) = (ctx.op(from)?, ctx.op(to)?);
            let d = default_cobordism(a0, a1, *intervals)?;
            let b0 = aps_condition(&*ctx.solver.decompose(a0)?, *left_cut, Side::Left)?;
            let b1 = aps_condition(&*ctx.solver.decompose(a1)?, *right_cut, Side::Right)?;
            let problem = assemble_bvp(&d, &b0, &b1)?;
            let ind = compute_index(&problem, &ctx.index)?;
            let adj = compute_index(&adjoint_bvp(&problem)?, &ctx.index)?;
            let holds = adj.index == -ind.index && ind.consistent && adj.consistent;
            let routes = vec![route_name(ind.route).into(), format!("adjoint/{}", route_name(adj.route))];
            (
                holds,
                Detail::Adjoint {
                    index: (&ind).into(),
                    adjoint: (&adj).into(),
                },
                routes,
            )
        }
        CaseDef::ConditionChange {
            from,
            to,
            a,
            b,
            intervals,
        } => {
            let d = default_cobordism(ctx.op(from)?, ctx.op(to)?, *intervals)?;
            let v = check_condition_change(&d, &ctx.solver, *a, *b, &ctx.index)?;
            (v.holds, Detail::Change((&v).into()), vec!["aps_index".into(), "eigenvalue_count".into()])
        }
        CaseDef::Splitting {
            from,
            to,
            cuts,
            intervals,
        } => {
            let d = default_cobordism(ctx.op(from)?, ctx.op(to)?, *intervals)?;
            let verdicts = cuts
                .iter()
                .map(|&k| check_splitting(&d, &ctx.solver, k, &ctx.index))
                .collect::<callias_core::Result<Vec<_>>>()?;
            (
                verdicts.iter().all(|v| v.holds),
                Detail::Splitting {
                    cuts: verdicts.iter().map(Into::into).collect(),
                },
                vec!["aps_index".into(), "dual_aps_index".into(), "transmission".into()],
            )
        }
    })
}

#[derive(Serialize)]
struct SuiteBody {
    all_hold: bool,
    cases: Vec<CaseJson>,
}

fn suite(ctx: &Ctx, select: &[String], prov: &mut Provenance) -> Result<SuiteBody, CliError> {
    let cases = &ctx.cfg.file.suite.as_ref().expect("validated").cases;
    for name in select {
        if !cases.contains_key(name) {
            return Err(CliError::Schema(format!("--suite names unknown case '{name}'")));
        }
    }
    let chosen: Vec<(&String, &CaseDef)> =
        cases.iter().filter(|(n, _)| select.is_empty() || select.contains(n)).collect();
    let results = chosen
        .par_iter()
        .map(|(name, case)| run_case(ctx, case).map_err(|e| e.context(format!("suite case '{name}'"))))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = Vec::new();
    for ((name, case), (holds, detail, routes)) in chosen.into_iter().zip(results) {
        if !holds {
            log::error!("suite case '{name}' failed");
        }
        prov.insert(format!("suite/{name}"), routes);
        out.push(CaseJson {
            name: name.clone(),
            check: case_check(case),
            holds,
            detail,
        });
    }
    Ok(SuiteBody {
        all_hold: out.iter().all(|c| c.holds),
        cases: out,
    })
}

#[derive(Serialize)]
struct SpectrumBody {
    operators: Vec<SpectrumJson>,
}

#[derive(Serialize)]
struct EtaBody {
    pairs: Vec<EtaJson>,
}

#[derive(Serialize)]
struct CacheJson {
    solver_invocations: usize,
    disk_hits: usize,
    memory_hits: usize,
    corrupt_entries: usize,
}

#[derive(Serialize)]
struct Manifest {
    schema: u32,
    csv_schema: u32,
    artifact_version: &'static str,
    config_sha256: String,
    scenario: &'static str,
    workers: usize,
    wall_time_s: Num,
    cache: CacheJson,
    provenance: Provenance,
    files: Vec<String>,
}

fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::Spectrum => "spectrum",
        Scenario::Index => "index",
        Scenario::Flow => "flow",
        Scenario::Eta => "eta",
        Scenario::Suite => "suite",
    }
}

/// Computes every result of `cfg` without touching the output directory.
pub fn execute(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let workers = opts.workers.or(cfg.file.workers).unwrap_or_else(rayon::current_num_threads);
    if workers == 0 {
        return Err(CliError::Schema("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let cache = match &opts.cache_dir {
        Some(dir) => SpectralCache::on_disk(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?,
        None => SpectralCache::memory(),
    };
    let t = &cfg.file.tolerances;
    let mut index_opts = IndexOptions {
        rank_tol: t.rank_tol,
        ..IndexOptions::default()
    };
    if let Some(limit) = t.dense_limit {
        index_opts.dense_limit = limit;
    }
    let ctx = Ctx {
        cfg,
        solver: Solver {
            cache: &cache,
            zero_tol: t.zero_tol,
        },
        cache: &cache,
        index: index_opts,
    };
    let scenario = scenario_name(cfg.file.scenario);
    let mut outputs = Outputs::default();
    let mut prov = Provenance::new();
    let mut all_hold = None;
    pool.install(|| -> Result<(), CliError> {
        fn wrap<T: Serialize>(scenario: &'static str, body: T) -> Report<T> {
            Report {
                schema: REPORT_SCHEMA,
                scenario,
                body,
            }
        }
        match cfg.file.scenario {
            Scenario::Spectrum => {
                let operators = spectrum_entries(&ctx, &mut outputs, &mut prov)?;
                outputs.add_json(REPORT_FILE, &wrap(scenario, SpectrumBody { operators }))
            }
            Scenario::Index => {
                let body = index(&ctx, &mut prov)?;
                outputs.add_json(REPORT_FILE, &wrap(scenario, body))
            }
            Scenario::Flow => {
                let body = flow(&ctx, &mut outputs, &mut prov)?;
                outputs.add_json(REPORT_FILE, &wrap(scenario, body))
            }
            Scenario::Eta => {
                let pairs = eta(&ctx, &mut prov)?;
                outputs.add_json(REPORT_FILE, &wrap(scenario, EtaBody { pairs }))
            }
            Scenario::Suite => {
                let body = suite(&ctx, &opts.suite, &mut prov)?;
                all_hold = Some(body.all_hold);
                outputs.add_json(REPORT_FILE, &wrap(scenario, body))
            }
        }
    })?;
    let stats = cache.stats();
    let mut files: Vec<String> = outputs.names().map(|p| p.display().to_string()).collect();
    files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        schema: REPORT_SCHEMA,
        csv_schema: CSV_SCHEMA,
        artifact_version: ARTIFACT_VERSION,
        config_sha256: cfg.content_hash.clone(),
        scenario,
        workers,
        wall_time_s: Num(start.elapsed().as_secs_f64()),
        cache: CacheJson {
            solver_invocations: stats.solver_invocations,
            disk_hits: stats.disk_hits,
            memory_hits: stats.memory_hits,
            corrupt_entries: stats.corrupt_entries,
        },
        provenance: prov,
        files,
    };
    outputs.add_json(MANIFEST_FILE, &manifest)?;
    Ok(RunOutcome {
        outputs,
        all_hold,
        stats,
    })
}

/// Loads, computes and writes; returns the process exit status.
pub fn run(config: &Path, opts: &RunOptions) -> i32 {
    let result = RunConfig::load(config).and_then(|cfg| {
        let outcome = execute(&cfg, opts)?;
        outcome.outputs.write_all(&opts.out)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            log::info!(
                "wrote {} ({} solver invocations, {} disk hits)",
                opts.out.display(),
                outcome.stats.solver_invocations,
                outcome.stats.disk_hits
            );
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
