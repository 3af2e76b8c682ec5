//! Output files: CSV schemas, number formatting and atomic writes.
//!
//! Every file is written as `<name>.partial` and renamed once complete, so
//! a crashed run leaves only `.partial` files behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const SAMPLE_HEADER: &[&str] =
    &["n", "sample", "trial_seed", "lambda_min", "lambda_max", "operator_norm", "residual_norm", "w1", "deloc_min_fraction"];

pub const SMALLBALL_HEADER: &[&str] = &[
    "n",
    "d",
    "lambdas",
    "deltas",
    "trials",
    "successes",
    "p_hat",
    "ci_lo",
    "ci_hi",
    "per_location_successes",
    "failed_trials",
    "ratio",
    "ratio_ci_lo",
    "ratio_ci_hi",
];

/// Mesoscopic runs share the smallball schema; `n` varies across rows.
pub const MESOSCOPIC_HEADER: &[&str] = SMALLBALL_HEADER;

pub const RIGIDITY_HEADER: &[&str] = &["n", "lambda", "k", "envelope_min", "envelope_max"];

pub const SEMICIRCLE_HEADER: &[&str] = &["n", "sample", "w1", "grid_bl"];

pub const RELATIONS_HEADER: &[&str] = &["n", "sample", "min_value", "argmin_tuple", "tuple_count"];

/// Long format: one row per reported number.
pub const ORACLE_HEADER: &[&str] = &["check", "case", "metric", "value"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

pub fn join_u64(xs: &[u64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// An in-memory table, serialized only by the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FileBody {
    Csv(Table),
    Json(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub body: FileBody,
}

impl OutputFile {
    pub fn csv(name: &str, table: Table) -> Self {
        Self { name: name.to_string(), body: FileBody::Csv(table) }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        Self { name: name.to_string(), body: FileBody::Json(serde_json::to_value(value).expect("serializable")) }
    }

    pub fn bytes(&self) -> anyhow::Result<Vec<u8>> {
        match &self.body {
            FileBody::Csv(t) => t.to_bytes(),
            FileBody::Json(v) => {
                let mut b = serde_json::to_vec_pretty(v)?;
                b.push(b'\n');
                Ok(b)
            }
        }
    }
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Write `bytes` to `path` via `<path>.partial` and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = partial_path(path);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)
}
