//! Dataset emission as CSV or JSON, plus the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if *v == 0.0 || (1e-4..1e9).contains(&v.abs()) => format!("{v}"),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }
}

/// One experiment's result: a table plus scalar metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub experiment: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Vec<(String, Cell)>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn new(experiment: &'static str, columns: &[&'static str]) -> Self {
        Dataset {
            experiment,
            columns: columns.to_vec(),
            rows: Vec::new(),
            meta: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Cell>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# sqclock {} schema={SCHEMA}", self.experiment);
        let _ = writeln!(out, "# seed={seed}");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={}", v.csv());
        }
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, params: &impl Serialize, seed: u64) -> Result<String> {
        let mut data = Map::new();
        for (j, name) in self.columns.iter().enumerate() {
            let col: Vec<Value> = self.rows.iter().map(|r| r[j].json()).collect();
            data.insert(name.to_string(), Value::Array(col));
        }
        let meta: Map<String, Value> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), v.json()))
            .collect();
        let doc = json!({
            "schema": SCHEMA,
            "experiment": self.experiment,
            "params": params,
            "seed": seed,
            "meta": meta,
            "warnings": self.warnings,
            "data": data,
        });
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn render(&self, format: Format, params: &impl Serialize, seed: u64) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv(seed)),
            Format::Json => self.to_json(params, seed),
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the dataset to `out` (stdout when `None`) and, for files, a
/// manifest alongside it.
pub fn emit(
    data: &Dataset,
    format: Format,
    params: &impl Serialize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let text = data.render(format, params, seed)?;
    let Some(path) = out else {
        print!("{text}");
        return Ok(());
    };
    std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    let manifest = json!({
        "tool": "sqclock",
        "version": env!("CARGO_PKG_VERSION"),
        "schema": SCHEMA,
        "experiment": data.experiment,
        "format": match format { Format::Csv => "csv", Format::Json => "json" },
        "output": path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "seed": seed,
        "params": params,
    });
    let mpath = manifest_path(path);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", mpath.display()))?;
    Ok(())
}
