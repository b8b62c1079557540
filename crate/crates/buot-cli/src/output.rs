//! Deterministic result writers: CSV tables and line-delimited JSON
//! summaries, each referencing the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::manifest::MANIFEST_FILE;

/// A CSV table with a manifest-reference comment line on top. Floats are
/// formatted with Rust's shortest round-trip representation, so identical
/// runs produce identical bytes.
pub struct CsvTable {
    buffer: String,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        let mut buffer = format!("# manifest: {MANIFEST_FILE}\n");
        buffer.push_str(&columns.join(","));
        buffer.push('\n');
        CsvTable { buffer }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.buffer, "{}", cells.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.buffer)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// Formats a float with full round-trip fidelity.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Appends one summary record (a single JSON line) to `summary.jsonl`.
pub struct SummaryWriter {
    path: PathBuf,
    lines: Vec<String>,
}

impl SummaryWriter {
    pub fn new(out_dir: &Path) -> Self {
        SummaryWriter { path: out_dir.join("summary.jsonl"), lines: Vec::new() }
    }

    pub fn record(&mut self, mut value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut value {
            map.insert(
                "manifest".to_string(),
                serde_json::Value::String(MANIFEST_FILE.to_string()),
            );
        }
        self.lines.push(value.to_string());
    }

    pub fn write(&self) -> Result<(), CliError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        std::fs::write(&self.path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))?;
        Ok(())
    }
}

/// Creates the output directory if needed and returns it.
pub fn ensure_out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}
