//! CSV tables and manifests. Every row of every table starts with the
//! configuration fingerprint and the artifact version.

use crate::error::CliError;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn render(&self, fingerprint: &str, version: &str) -> String {
        let mut out = String::from("fingerprint,version");
        for h in &self.header {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{fingerprint},{version}");
            for v in row {
                out.push(',');
                out.push_str(v);
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Gate {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Gate { name: name.to_string(), pass, detail: detail.into() }
    }
}

/// Everything a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Binary files already written to the output directory.
    pub binaries: Vec<PathBuf>,
    pub gates: Vec<Gate>,
    pub summary: Vec<String>,
}

impl Report {
    pub fn failed_gates(&self) -> usize {
        self.gates.iter().filter(|g| !g.pass).count()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the tables, a gates table and `manifest.txt` into `dir`.
pub fn write_report(
    dir: &Path,
    subcommand: &str,
    fingerprint: &str,
    version: &str,
    canonical_config: &str,
    report: &Report,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Precondition(format!("output directory {} is not writable: {e}", dir.display())))?;
    let mut files: Vec<(String, String)> = Vec::new();
    let mut written = Vec::new();
    let mut gates = Table::new("gates", &["gate", "pass", "detail"]);
    for g in &report.gates {
        gates.push(vec![g.name.clone(), g.pass.to_string(), g.detail.replace(',', ";")]);
    }
    for table in report.tables.iter().chain(std::iter::once(&gates)) {
        let text = table.render(fingerprint, version);
        let name = format!("{}.csv", table.name);
        let path = dir.join(&name);
        std::fs::write(&path, &text)?;
        files.push((name, sha256_hex(text.as_bytes())));
        written.push(path);
    }
    for bin in &report.binaries {
        let bytes = std::fs::read(bin)?;
        let name = bin.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        files.push((name, sha256_hex(&bytes)));
    }
    let mut manifest = String::new();
    let _ = writeln!(manifest, "fingerprint = {fingerprint}");
    let _ = writeln!(manifest, "version = {version}");
    let _ = writeln!(manifest, "subcommand = {subcommand}");
    for line in canonical_config.lines() {
        let _ = writeln!(manifest, "config.{line}");
    }
    for (name, digest) in &files {
        let _ = writeln!(manifest, "file.{name} = sha256:{digest}");
    }
    for g in &report.gates {
        let _ = writeln!(manifest, "gate.{} = {}", g.name, if g.pass { "pass" } else { "fail" });
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_carry_fingerprint_and_version() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![num(0.1), num(2.0)]);
        let text = t.render("abcd", "0.1.0");
        assert_eq!(text, "fingerprint,version,a,b\nabcd,0.1.0,0.1,2\n");
    }

    #[test]
    fn manifest_lists_files_and_gates() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = Report::default();
        let mut t = Table::new("demo", &["x"]);
        t.push(vec!["1".into()]);
        report.tables.push(t);
        report.gates.push(Gate::new("demo-gate", false, "x, y"));
        write_report(dir.path(), "demo", "ff", "9.9", "a.b = 1\n", &report).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(manifest.contains("fingerprint = ff\n"));
        assert!(manifest.contains("config.a.b = 1\n"));
        assert!(manifest.contains("file.demo.csv = sha256:"));
        assert!(manifest.contains("gate.demo-gate = fail"));
        let gates = std::fs::read_to_string(dir.path().join("gates.csv")).unwrap();
        assert!(gates.ends_with("ff,9.9,demo-gate,false,x; y\n"));
    }
}
