//! Shared serialization: numeric CSV files, JSON manifests with checksums,
//! and portable graymap/pixmap images.
//!
//! CSV conventions are fixed so artifact files are bit-exact across runs:
//! comma separator, `.` decimal point, `\n` line endings, UTF-8, and floats
//! printed with 17 significant digits so every finite double round-trips
//! exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Format a double with enough digits to reparse to the same bits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.17e}")
}

/// Write a rectangular numeric CSV with a header line.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::invalid(format!(
                "write_csv: row {i} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
    }
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                write!(w, ",")?;
            }
            write!(w, "{}", format_f64(*v))?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a numeric CSV written by [`write_csv`]. Ragged rows and malformed
/// numerals are reported with their line number.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        msg: "empty file".into(),
    })??;
    let header: Vec<String> = header_line.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: format!("ragged row: {} fields, expected {}", fields.len(), header.len()),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in fields {
            row.push(f.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: format!("bad numeral {f:?}: {e}"),
            })?);
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Write a matrix as CSV, one row per line.
pub fn write_matrix_csv(path: &Path, header: &[String], m: &ArrayView2<f64>) -> Result<()> {
    let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
    write_csv(path, header, &rows)
}

/// Read a matrix written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let (header, rows) = read_csv(path)?;
    let ncols = header.len();
    let nrows = rows.len();
    let mut m = Array2::<f64>::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok((header, m))
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// One artifact produced by an experiment, checksummed at write time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// One embedded acceptance check of an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Machine-readable record of an experiment run: every output file with a
/// checksum, all seeds, the fit mode, scalar metrics, and the embedded
/// pass/fail checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_mode: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    pub artifacts: Vec<ArtifactEntry>,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(experiment: &str) -> Self {
        Manifest {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            fit_mode: None,
            seeds: BTreeMap::new(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            pass: true,
            artifacts: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    /// Register a file (path relative to `out_dir`) that must already exist.
    pub fn add_artifact(&mut self, out_dir: &Path, rel: &str) -> Result<()> {
        let full = out_dir.join(rel);
        let meta = fs::metadata(&full)?;
        self.artifacts.push(ArtifactEntry {
            file: rel.to_string(),
            sha256: sha256_file(&full)?,
            bytes: meta.len(),
        });
        Ok(())
    }

    pub fn add_check(&mut self, name: &str, pass: bool, detail: String) {
        self.pass &= pass;
        self.checks.push(CheckResult {
            name: name.to_string(),
            pass,
            detail,
        });
    }

    /// Write `manifest.json` into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(out_dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }
}

/// Binary portable graymap (P5), 8-bit.
pub fn write_pgm(path: &Path, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    if gray.len() != width * height {
        return Err(Error::invalid("write_pgm: buffer size mismatch"));
    }
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(gray)?;
    w.flush()?;
    Ok(())
}

/// Binary portable pixmap (P6), 8-bit RGB.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != 3 * width * height {
        return Err(Error::invalid("write_ppm: buffer size mismatch"));
    }
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)?;
    w.flush()?;
    Ok(())
}
