//! Machine-readable result emission: named column tables plus metadata,
//! written as one CSV file per table or a single JSON document. Files are
//! written atomically (temp file + rename), and table contents carry no
//! timestamps so identical configurations produce identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ColumnData {
    Float(Vec<f64>),
    Str(Vec<String>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Float(v) => v.len(),
            ColumnData::Str(v) => v.len(),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            ColumnData::Float(v) => format_float(v[row]),
            ColumnData::Str(v) => v[row].clone(),
        }
    }
}

/// Shortest decimal representation that round-trips to the same f64.
pub fn format_float(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            columns: Vec::new(),
        }
    }

    pub fn float_column(mut self, name: impl Into<String>, data: Vec<f64>) -> Self {
        self.columns.push(Column {
            name: name.into(),
            data: ColumnData::Float(data),
        });
        self
    }

    pub fn str_column(mut self, name: impl Into<String>, data: Vec<String>) -> Self {
        self.columns.push(Column {
            name: name.into(),
            data: ColumnData::Str(data),
        });
        self
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map(|c| c.data.len()).unwrap_or(0)
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in 0..self.n_rows() {
            let cells: Vec<String> = self.columns.iter().map(|c| c.data.cell(row)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One named consistency check carried in the metadata.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let passed = value.abs() <= threshold;
        Self {
            name: name.into(),
            value,
            threshold,
            passed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub engine_version: String,
    pub mode: String,
    /// Fully resolved configuration, defaults included; re-running it
    /// reproduces the tables bit-identically on the same build.
    pub config: ExperimentConfig,
    pub checks: Vec<CheckLine>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultSet {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

impl ResultSet {
    pub fn new(mode: &str, config: &ExperimentConfig) -> Self {
        Self {
            metadata: Metadata {
                engine_version: env!("CARGO_PKG_VERSION").to_string(),
                mode: mode.to_string(),
                config: config.clone(),
                checks: Vec::new(),
                wall_time_s: 0.0,
            },
            tables: Vec::new(),
        }
    }

    pub fn push_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn push_check(&mut self, check: CheckLine) {
        self.metadata.checks.push(check);
    }

    pub fn all_checks_passed(&self) -> bool {
        self.metadata.checks.iter().all(|c| c.passed)
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    {
        let mut file =
            std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(contents.as_bytes())
            .with_context(|| format!("writing {}", tmp.display()))?;
        file.sync_all().ok();
    }
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

/// Write the results under `dir`, returning the paths written.
pub fn emit(results: &ResultSet, dir: &Path, format: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    match format {
        "csv" => {
            for table in &results.tables {
                let path = dir.join(format!("{}.csv", table.name));
                write_atomic(&path, &table.to_csv())?;
                written.push(path);
            }
            // metadata rides along as JSON so the run stays reproducible
            let path = dir.join("metadata.json");
            let text = serde_json::to_string_pretty(&results.metadata)?;
            write_atomic(&path, &text)?;
            written.push(path);
        }
        "json" => {
            let path = dir.join("result.json");
            let text = serde_json::to_string_pretty(results)?;
            write_atomic(&path, &text)?;
            written.push(path);
        }
        other => bail!("output.format must be `csv` or `json`, got `{other}`"),
    }
    Ok(written)
}
