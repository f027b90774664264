//! Contracts, CSV tables and the JSON summary written by every subcommand.

use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Version of the CSV and JSON layouts documented in the README.
pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_FILE: &str = "summary.json";
pub const FAILURES_FILE: &str = "failures.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contract {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Rows of one CSV file; cells are preformatted strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

/// Shortest round-trip formatting, so reruns are byte identical.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct Report {
    pub subcommand: String,
    pub seed: u64,
    pub config: Value,
    pub contracts: Vec<Contract>,
    pub results: serde_json::Map<String, Value>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(subcommand: &str, seed: u64, config: &impl Serialize) -> Self {
        Report {
            subcommand: subcommand.to_string(),
            seed,
            config: serde_json::to_value(config).expect("configs serialize"),
            contracts: Vec::new(),
            results: serde_json::Map::new(),
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.contracts.push(Contract {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("results serialize");
        self.results.insert(key.to_string(), v);
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn passed(&self) -> bool {
        self.contracts.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Contract> {
        self.contracts.iter().filter(|c| !c.passed).collect()
    }

    pub fn summary(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "passed": self.passed(),
            "config": self.config,
            "contracts": self.contracts,
            "results": self.results,
            "files": self.tables.iter().map(Table::file_name).collect::<Vec<_>>(),
        })
    }

    /// Writes the CSV tables, `summary.json` and, on failure, `failures.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(t.file_name());
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            w.flush()?;
            written.push(path);
        }
        let summary = dir.join(SUMMARY_FILE);
        std::fs::write(&summary, pretty(&self.summary()))?;
        written.push(summary);
        let failures = dir.join(FAILURES_FILE);
        if self.passed() {
            if failures.exists() {
                std::fs::remove_file(&failures)?;
            }
        } else {
            let manifest = json!({
                "schema_version": SCHEMA_VERSION,
                "subcommand": self.subcommand,
                "failures": self.failures(),
            });
            std::fs::write(&failures, pretty(&manifest))?;
            written.push(failures);
        }
        Ok(written)
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
