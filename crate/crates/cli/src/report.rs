//! Report formats.
//!
//! JSON numbers that are not integers are written with 17 significant digits in
//! scientific notation (`{:.16e}`), and non-finite values as `null`, so equal
//! results always serialize to equal bytes. CSV files have fixed, versioned
//! column sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::CliError;

/// Version of the JSON report schemas (documented in `docs/reports.md`).
pub const REPORT_SCHEMA: u32 = 1;

/// Version of the CSV column sets.
pub const CSV_SCHEMA: u32 = 1;

pub const SPECTRUM_COLUMNS: [&str; 3] = ["index", "eigenvalue", "residual"];
pub const EIGENCURVE_COLUMNS: [&str; 3] = ["s", "branch", "lambda"];

/// A float with fixed formatting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(fmt_num(self.0)).map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num(x)
    }
}

pub fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().copied().map(Num).collect()
}

/// Files of a run, held in memory until the run has succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(Path::new(name)).map(|v| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.keys().map(|p| p.as_path())
    }

    /// Writes every file under `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn csv_bytes<R: IntoIterator<Item = [String; 3]>>(header: [&str; 3], rows: R) -> Result<Vec<u8>, CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// `index,eigenvalue,residual`, eigenvalues ascending.
pub fn spectrum_csv(eigenvalues: &[f64], residuals: &[f64]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        SPECTRUM_COLUMNS,
        eigenvalues
            .iter()
            .zip(residuals)
            .enumerate()
            .map(|(i, (l, r))| [i.to_string(), fmt_num(*l), fmt_num(*r)]),
    )
}

/// `s,branch,lambda`, ordered by `s` then branch.
pub fn eigencurves_csv(rows: &[(f64, usize, f64)]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        EIGENCURVE_COLUMNS,
        rows.iter().map(|(s, b, l)| [fmt_num(*s), b.to_string(), fmt_num(*l)]),
    )
}
