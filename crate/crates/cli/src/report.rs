//! `nttkit report`: prints what earlier runs wrote, never recomputing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use crate::output::{Manifest, MANIFEST, RESULTS};

/// Manifests in `dir` itself, or else in its immediate subdirectories.
fn find_manifests(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let own = dir.join(MANIFEST);
    if own.is_file() {
        return Ok(vec![own]);
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path().join(MANIFEST);
        if path.is_file() {
            found.push(path);
        }
    }
    found.sort();
    if found.is_empty() {
        bail!("no manifest found in {}", dir.display());
    }
    Ok(found)
}

fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "  {}", cells.join("  ").trim_end());
    }
    out
}

/// Top-level scalar config entries, the parameters worth a glance.
fn key_params(config: &serde_json::Value) -> String {
    let Some(obj) = config.as_object() else {
        return String::new();
    };
    obj.iter()
        .filter(|(k, v)| *k != "experiment" && !v.is_object())
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn block(path: &Path) -> anyhow::Result<String> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let m: Manifest =
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = String::new();
    let status = serde_json::to_value(m.status)?;
    let _ = writeln!(
        out,
        "== {} ({}) {}",
        m.experiment,
        status.as_str().unwrap_or("?"),
        dir.display()
    );
    let _ = writeln!(out, "  {}", key_params(&m.config));
    if let Some(e) = &m.error {
        let _ = writeln!(out, "  error: {e}");
    }
    for (k, v) in &m.headline {
        let _ = writeln!(out, "  {k}: {v}");
    }
    let results = dir.join(RESULTS);
    if results.is_file() {
        let mut rdr = csv::Reader::from_path(&results)?;
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        out.push_str(&aligned(&header, &rows));
    }
    Ok(out)
}

pub fn report(dir: &Path) -> anyhow::Result<String> {
    let blocks = find_manifests(dir)?
        .iter()
        .map(|p| block(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(blocks.join("\n"))
}
