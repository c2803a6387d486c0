//! Artifact files: manifest, results table, per-run traces.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nttkit::opt::IterRecord;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const RESULTS: &str = "results.csv";

/// Shortest round-trip representation, always in exponent form so very
/// small and very large values stay compact.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn trace(records: &[IterRecord], extra: Option<(&'static str, &[f64])>) -> Self {
        let mut header = vec!["iter", "stage", "cost", "grad_norm", "step", "beta"];
        if let Some((name, _)) = extra {
            header.push(name);
        }
        let mut t = Self {
            header,
            rows: Vec::new(),
        };
        for (k, r) in records.iter().enumerate() {
            let mut row = vec![
                r.iter.to_string(),
                r.stage.to_string(),
                num(r.cost),
                num(r.grad_norm),
                num(r.step),
                num(r.beta),
            ];
            if let Some((_, values)) = extra {
                row.push(values.get(k).map_or(String::new(), |v| num(*v)));
            }
            t.rows.push(row);
        }
        t
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub config: serde_json::Value,
    pub headline: BTreeMap<String, String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    /// The run stopped early; the listed files hold partial results.
    Partial,
}

/// Writes the artifact set into `dir`, replacing files from earlier runs.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn table(&mut self, rel: &str, table: &Table) -> anyhow::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        table.write(&path)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn manifest(self, mut manifest: Manifest) -> anyhow::Result<()> {
        manifest.files = self.files;
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}
