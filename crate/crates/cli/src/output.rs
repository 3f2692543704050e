//! Report emission: the machine-readable run record, markdown and CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use detrefine_core::formats::{write_bytes, write_json};
use detrefine_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Everything needed to rerun a command: its arguments, the effective
/// configuration after flags were applied, and what it measured.
#[derive(Debug, Serialize)]
pub struct RunReport<'a, M: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub inputs: BTreeMap<String, PathBuf>,
    pub seed: Option<u64>,
    pub config: &'a RunConfig,
    pub metrics: M,
}

impl<'a, M: Serialize> RunReport<'a, M> {
    pub fn new(command: &'a str, config: &'a RunConfig, seed: Option<u64>, metrics: M) -> Self {
        RunReport {
            tool: "detrefine",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: BTreeMap::new(),
            seed,
            config,
            metrics,
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.to_path_buf());
        self
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        write_json(&out.join("run.json"), self)
    }
}

/// A float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    write_bytes(path, &bytes)
}

/// Markdown table with values shown to four decimals.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut s = format!("| {} |\n|{}\n", self.header.join(" | "), " --- |".repeat(self.header.len()));
        for r in &self.rows {
            s.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        s
    }
}

pub fn short(x: f64) -> String {
    format!("{x:.4}")
}
