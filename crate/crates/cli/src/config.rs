//! Run configuration: a TOML file with typed sections.
//!
//! Every table rejects unknown keys. [`RunConfig::load`] parses, resolves every
//! named reference and builds all operators and families before anything is
//! computed, so schema problems surface before any output exists.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use callias_core::bvp::IndexRoute;
use callias_core::flow_eta::FamilySpec;
use callias_core::grid::{make_clifford, BoundarySlice};
use callias_core::ops::{build_boundary_operator, BoundaryOperator, PotentialField};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Spectrum,
    Index,
    Flow,
    Eta,
    Suite,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Scenario,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub operators: BTreeMap<String, OperatorDef>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilyDef>,
    pub spectrum: Option<SpectrumSection>,
    pub index: Option<IndexSection>,
    pub flow: Option<FlowSection>,
    pub eta: Option<EtaSection>,
    pub suite: Option<SuiteSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Rank threshold override for index computations.
    pub rank_tol: Option<f64>,
    /// Absolute kernel threshold override for eigenvalue classification.
    pub zero_tol: Option<f64>,
    /// Largest `max(dim V, dim W)` handled by the dense index route.
    pub dense_limit: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SliceDef {
    Points {
        count: usize,
    },
    Plane {
        n: usize,
        radius: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialDef {
    Constant { value: f64 },
    Bowl { strength: f64 },
    Linear { gx: f64, gy: f64 },
    Plateau { inside: f64, outside: f64, radius: f64, width: f64 },
    /// Sidecar CSV with one value per site in site order, relative to the config file.
    Table { file: PathBuf },
}

/// Extra mass on a disc of sites.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchDef {
    pub center: [f64; 2],
    pub radius: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDef {
    pub slice: SliceDef,
    /// Point slices only: the full diagonal, two entries per point.
    pub diagonal: Option<Vec<f64>>,
    pub potential: Option<PotentialDef>,
    #[serde(default)]
    pub mass: f64,
    pub patch: Option<PatchDef>,
}

fn default_intervals() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDef {
    /// `(1 - s) from + s to`.
    Linear {
        from: String,
        to: String,
        #[serde(default = "default_intervals")]
        intervals: usize,
    },
    /// `base` plus a patch whose mass moves linearly from `from_mass` to `to_mass`.
    MassSweep {
        base: String,
        center: [f64; 2],
        radius: f64,
        from_mass: f64,
        to_mass: f64,
        #[serde(default = "default_intervals")]
        intervals: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub operators: Vec<String>,
    /// Compute only a certified window around 0 with at least this many pairs.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Aps,
    DualAps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteDef {
    Auto,
    Dense,
    Transfer,
}

impl From<RouteDef> for IndexRoute {
    fn from(r: RouteDef) -> Self {
        match r {
            RouteDef::Auto => IndexRoute::Auto,
            RouteDef::Dense => IndexRoute::Dense,
            RouteDef::Transfer => IndexRoute::Transfer,
        }
    }
}

fn default_route() -> RouteDef {
    RouteDef::Auto
}

fn default_cobordism_intervals() -> usize {
    callias_core::flow_eta::COBORDISM_INTERVALS
}

fn default_kind() -> ConditionKind {
    ConditionKind::Aps
}

/// A boundary value problem on the interpolating cylinder from `from` to `to`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub from: String,
    pub to: String,
    #[serde(default = "default_cobordism_intervals")]
    pub intervals: usize,
    #[serde(default = "default_kind")]
    pub left: ConditionKind,
    #[serde(default)]
    pub left_cut: f64,
    #[serde(default = "default_kind")]
    pub right: ConditionKind,
    #[serde(default)]
    pub right_cut: f64,
    #[serde(default = "default_route")]
    pub route: RouteDef,
    /// Also compute the adjoint problem.
    #[serde(default)]
    pub adjoint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodDef {
    CrossingCount,
    DaiZhang,
    Both,
}

fn default_method() -> MethodDef {
    MethodDef::Both
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub family: String,
    #[serde(default = "default_method")]
    pub method: MethodDef,
    /// Write the branch-matched eigencurves CSV.
    #[serde(default = "yes")]
    pub curves: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSection {
    /// Pairs `[A0, A1]`; each yields `eta(A1, A0)`.
    pub pairs: Vec<[String; 2]>,
    #[serde(default = "default_cobordism_intervals")]
    pub intervals: usize,
    /// Also evaluate the heat-trace route.
    #[serde(default)]
    pub heat: bool,
}

fn default_heat_tol() -> f64 {
    1e-6
}

/// One identity check; the table key is the case name.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaseDef {
    /// `eta(a1, a0)` with consistent routes, optionally equal to `expect`.
    Eta {
        a0: String,
        a1: String,
        expect: Option<i64>,
    },
    /// Antisymmetry and cocycle on a triple.
    EtaProperties { a0: String, a1: String, a2: String },
    /// `eta(A^1, A^0) = 2 sf`, optionally with a reference operator.
    EtaFlow { family: String, reference: Option<String> },
    /// Both flow routes agree, optionally equal to `expect`.
    Flow { family: String, expect: Option<i64> },
    /// Heat-trace value within `tol` of `expect`.
    Heat {
        a0: String,
        a1: String,
        expect: f64,
        #[serde(default = "default_heat_tol")]
        tol: f64,
    },
    /// `ind (D*)_{B^ad} = -ind D_B` for APS conditions at the given cuts.
    Adjoint {
        from: String,
        to: String,
        #[serde(default)]
        left_cut: f64,
        #[serde(default)]
        right_cut: f64,
        #[serde(default = "default_cobordism_intervals")]
        intervals: usize,
    },
    /// Index change under a move of the left APS cut from `a` to `b`.
    ConditionChange {
        from: String,
        to: String,
        a: f64,
        b: f64,
        #[serde(default = "default_cobordism_intervals")]
        intervals: usize,
    },
    /// Splitting at interior nodes of the cobordism, with the transmission route.
    Splitting {
        from: String,
        to: String,
        cuts: Vec<usize>,
        #[serde(default = "default_cobordism_intervals")]
        intervals: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    pub cases: BTreeMap<String, CaseDef>,
}

/// A validated configuration with all operators and families built.
pub struct RunConfig {
    pub file: ConfigFile,
    /// SHA-256 of the raw config text.
    pub content_hash: String,
    pub operators: BTreeMap<String, BoundaryOperator>,
    pub families: BTreeMap<String, FamilySpec>,
}

impl std::fmt::Debug for RunConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunConfig")
            .field("scenario", &self.file.scenario)
            .field("content_hash", &self.content_hash)
            .finish()
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn read_table(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| schema(format!("cannot read table {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(format!("table {}: {e}", path.display())))?;
        for field in rec.iter().filter(|f| !f.is_empty()) {
            out.push(
                field
                    .parse::<f64>()
                    .map_err(|_| schema(format!("table {}: '{field}' is not a number", path.display())))?,
            );
        }
    }
    Ok(out)
}

fn build_operator(name: &str, def: &OperatorDef, base_dir: &Path) -> Result<BoundaryOperator, CliError> {
    let ctx = |e: callias_core::Error| CliError::from_core(e).context(format!("operator '{name}'"));
    let slice = match def.slice {
        SliceDef::Points { count } => BoundarySlice::points(count, 2),
        SliceDef::Plane { n, radius } => BoundarySlice::square(n, radius),
    }
    .map_err(ctx)?;
    let op = match (&def.diagonal, &def.potential) {
        (Some(_), Some(_)) => return Err(schema(format!("operator '{name}': give either diagonal or potential"))),
        (Some(d), None) => {
            if !matches!(def.slice, SliceDef::Points { .. }) {
                return Err(schema(format!("operator '{name}': diagonal needs a point slice")));
            }
            if def.mass != 0.0 || def.patch.is_some() {
                return Err(schema(format!("operator '{name}': diagonal operators take no mass or patch")));
            }
            if d.len() != slice.dim() {
                return Err(schema(format!(
                    "operator '{name}': {} diagonal entries for dimension {}",
                    d.len(),
                    slice.dim()
                )));
            }
            BoundaryOperator::points_diagonal(d).map_err(ctx)?
        }
        (None, p) => {
            let field = match p {
                None => PotentialField::Constant(0.0),
                Some(PotentialDef::Constant { value }) => PotentialField::Constant(*value),
                Some(PotentialDef::Bowl { strength }) => PotentialField::Bowl { strength: *strength },
                Some(PotentialDef::Linear { gx, gy }) => PotentialField::Linear { gx: *gx, gy: *gy },
                Some(PotentialDef::Plateau {
                    inside,
                    outside,
                    radius,
                    width,
                }) => PotentialField::Plateau {
                    inside: *inside,
                    outside: *outside,
                    radius: *radius,
                    width: *width,
                },
                Some(PotentialDef::Table { file }) => PotentialField::Table(read_table(&base_dir.join(file))?),
            };
            let mut values = field.sample(&slice).map_err(ctx)?;
            if let Some(p) = &def.patch {
                add_patch(&slice, &mut values, p.center, p.radius, p.mass);
            }
            let clifford = make_clifford(2).map_err(ctx)?;
            build_boundary_operator(&slice, &clifford, &values, def.mass).map_err(ctx)?
        }
    };
    Ok(op.with_label(name))
}

fn add_patch(slice: &BoundarySlice, values: &mut [f64], center: [f64; 2], radius: f64, mass: f64) {
    for (v, [x, y]) in values.iter_mut().zip(slice.site_coords()) {
        let (dx, dy) = (x - center[0], y - center[1]);
        if dx * dx + dy * dy < radius * radius {
            *v += mass;
        }
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, kind: &str, name: &str) -> Result<&'a T, CliError> {
    map.get(name).ok_or_else(|| schema(format!("unknown {kind} '{name}'")))
}

fn build_family(
    name: &str,
    def: &FamilyDef,
    defs: &BTreeMap<String, OperatorDef>,
    ops: &BTreeMap<String, BoundaryOperator>,
) -> Result<FamilySpec, CliError> {
    let ctx = |e: callias_core::Error| CliError::from_core(e).context(format!("family '{name}'"));
    let f = match def {
        FamilyDef::Linear { from, to, intervals } => {
            let (a, b) = (lookup(ops, "operator", from)?, lookup(ops, "operator", to)?);
            FamilySpec::linear(a, b, *intervals).map_err(ctx)?
        }
        FamilyDef::MassSweep {
            base,
            center,
            radius,
            from_mass,
            to_mass,
            intervals,
        } => {
            let base_op = lookup(ops, "operator", base)?;
            let def = lookup(defs, "operator", base)?;
            if def.diagonal.is_some() {
                return Err(schema(format!("family '{name}': mass sweeps need a potential-based operator")));
            }
            let slice = base_op.slice().clone();
            let values = base_op.potential_samples().to_vec();
            let (center, radius, m0, m1) = (*center, *radius, *from_mass, *to_mass);
            let label = name.to_string();
            FamilySpec::new(
                move |s| {
                    let mut v = values.clone();
                    add_patch(&slice, &mut v, center, radius, m0 + (m1 - m0) * s);
                    let clifford = make_clifford(2)?;
                    Ok(build_boundary_operator(&slice, &clifford, &v, 0.0)?.with_label(format!("{label}@{s}")))
                },
                *intervals,
            )
            .map_err(ctx)?
        }
    };
    Ok(f.with_label(name))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base_dir)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        use sha2::{Digest, Sha256};
        let file: ConfigFile = toml::from_str(text).map_err(|e| schema(e.to_string()))?;
        let content_hash = hex(&Sha256::digest(text.as_bytes()));
        let mut operators = BTreeMap::new();
        for (name, def) in &file.operators {
            operators.insert(name.clone(), build_operator(name, def, base_dir)?);
        }
        let mut families = BTreeMap::new();
        for (name, def) in &file.families {
            families.insert(name.clone(), build_family(name, def, &file.operators, &operators)?);
        }
        let cfg = Self {
            file,
            content_hash,
            operators,
            families,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn operator(&self, name: &str) -> Result<&BoundaryOperator, CliError> {
        lookup(&self.operators, "operator", name)
    }

    pub fn family(&self, name: &str) -> Result<&FamilySpec, CliError> {
        lookup(&self.families, "family", name)
    }

    fn validate(&self) -> Result<(), CliError> {
        let f = &self.file;
        if f.workers == Some(0) {
            return Err(schema("workers must be at least 1"));
        }
        let t = &f.tolerances;
        for (name, v) in [("rank_tol", t.rank_tol), ("zero_tol", t.zero_tol)] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return Err(schema(format!("tolerances.{name} must be positive")));
            }
        }
        let section = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(schema(format!("scenario '{name}' needs a [{name}] section")))
            }
        };
        match f.scenario {
            Scenario::Spectrum => {
                section(f.spectrum.is_some(), "spectrum")?;
                let s = f.spectrum.as_ref().unwrap();
                if s.operators.is_empty() {
                    return Err(schema("spectrum.operators is empty"));
                }
                for o in &s.operators {
                    self.operator(o)?;
                }
                if s.window == Some(0) {
                    return Err(schema("spectrum.window must be at least 1"));
                }
            }
            Scenario::Index => {
                section(f.index.is_some(), "index")?;
                let s = f.index.as_ref().unwrap();
                self.operator(&s.from)?;
                self.operator(&s.to)?;
                if s.intervals < 3 {
                    return Err(schema("index.intervals must be at least 3"));
                }
            }
            Scenario::Flow => {
                section(f.flow.is_some(), "flow")?;
                self.family(&f.flow.as_ref().unwrap().family)?;
            }
            Scenario::Eta => {
                section(f.eta.is_some(), "eta")?;
                let s = f.eta.as_ref().unwrap();
                if s.pairs.is_empty() {
                    return Err(schema("eta.pairs is empty"));
                }
                for [a, b] in &s.pairs {
                    self.operator(a)?;
                    self.operator(b)?;
                }
                if s.intervals < 3 {
                    return Err(schema("eta.intervals must be at least 3"));
                }
            }
            Scenario::Suite => {
                section(f.suite.is_some(), "suite")?;
                for (name, case) in &f.suite.as_ref().unwrap().cases {
                    self.validate_case(case).map_err(|e| e.context(format!("suite case '{name}'")))?;
                }
            }
        }
        Ok(())
    }

    fn validate_case(&self, case: &CaseDef) -> Result<(), CliError> {
        match case {
            CaseDef::Eta { a0, a1, .. } | CaseDef::Heat { a0, a1, .. } => {
                self.operator(a0)?;
                self.operator(a1)?;
            }
            CaseDef::EtaProperties { a0, a1, a2 } => {
                for o in [a0, a1, a2] {
                    self.operator(o)?;
                }
            }
            CaseDef::EtaFlow { family, reference } => {
                self.family(family)?;
                if let Some(r) = reference {
                    self.operator(r)?;
                }
            }
            CaseDef::Flow { family, .. } => {
                self.family(family)?;
            }
            CaseDef::Adjoint { from, to, .. } | CaseDef::ConditionChange { from, to, .. } => {
                self.operator(from)?;
                self.operator(to)?;
            }
            CaseDef::Splitting { from, to, cuts, .. } => {
                self.operator(from)?;
                self.operator(to)?;
                if cuts.is_empty() {
                    return Err(schema("splitting needs at least one cut"));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."))
    }

    const DIAG: &str = r#"
scenario = "eta"
[operators.a0]
slice = { kind = "points", count = 1 }
diagonal = [1.0, -1.0]
[operators.a1]
slice = { kind = "points", count = 1 }
diagonal = [1.0, 1.0]
[eta]
pairs = [["a0", "a1"]]
"#;

    #[test]
    fn parses_and_builds() {
        let c = parse(DIAG).unwrap();
        assert_eq!(c.operators.len(), 2);
        assert_eq!(c.operator("a1").unwrap().dim(), 2);
        assert_eq!(c.content_hash.len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        for bad in [
            DIAG.replace("scenario = \"eta\"", "scenario = \"eta\"\ncolour = 1"),
            DIAG.replace("diagonal = [1.0, 1.0]", "diagonal = [1.0, 1.0]\nshade = 2"),
            DIAG.replace("count = 1 }\ndiagonal = [1.0, -1.0]", "count = 1, rank = 4 }\ndiagonal = [1.0, -1.0]"),
            DIAG.replace("pairs = [[\"a0\", \"a1\"]]", "pairs = [[\"a0\", \"a1\"]]\nheat_tol = 1"),
        ] {
            assert!(matches!(parse(&bad), Err(CliError::Schema(_))), "{bad}");
        }
    }

    #[test]
    fn rejects_bad_references_and_shapes() {
        assert!(matches!(parse(&DIAG.replace("[\"a0\", \"a1\"]", "[\"a0\", \"zz\"]")), Err(CliError::Schema(_))));
        assert!(matches!(parse(&DIAG.replace("[1.0, 1.0]", "[1.0, 1.0, 2.0]")), Err(CliError::Schema(_))));
        assert!(matches!(parse(&DIAG.replace("scenario = \"eta\"", "scenario = \"flow\"")), Err(CliError::Schema(_))));
        assert!(matches!(parse(&DIAG.replace("scenario = \"eta\"", "scenario = \"teleport\"")), Err(CliError::Schema(_))));
    }

    #[test]
    fn plane_operator_with_table_and_patch() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<String> = (0..16).map(|i| format!("{}", i as f64 * 0.1)).collect();
        std::fs::write(dir.path().join("f.csv"), values.join("\n")).unwrap();
        let text = r#"
scenario = "spectrum"
[operators.t]
slice = { kind = "plane", n = 4, radius = 1.0 }
potential = { kind = "table", file = "f.csv" }
patch = { center = [0.0, 0.0], radius = 0.6, mass = 1.0 }
[spectrum]
operators = ["t"]
"#;
        let c = RunConfig::parse(text, dir.path()).unwrap();
        let samples = c.operator("t").unwrap().potential_samples();
        // Sites 5, 6, 9, 10 sit at distance 0.5 * sqrt(2) from the centre.
        assert!((samples[0] - 0.0).abs() < 1e-12);
        assert!((samples[5] - 1.5).abs() < 1e-12);
        let short = text.replace("potential = { kind = \"table\", file = \"f.csv\" }", "potential = { kind = \"table\", file = \"missing.csv\" }");
        assert!(matches!(RunConfig::parse(&short, dir.path()), Err(CliError::Schema(_))));
    }

    #[test]
    fn mass_sweep_family() {
        let text = r#"
scenario = "flow"
[operators.bowl]
slice = { kind = "plane", n = 4, radius = 2.0 }
potential = { kind = "bowl", strength = 1.0 }
[families.sweep]
kind = "mass_sweep"
base = "bowl"
center = [0.5, 0.0]
radius = 1.0
from_mass = -3.0
to_mass = 3.0
intervals = 4
[flow]
family = "sweep"
"#;
        let c = parse(text).unwrap();
        let f = c.family("sweep").unwrap();
        assert_eq!(f.grid().len(), 5);
        assert!(!f.compact_variation().unwrap().is_empty());
    }
}
