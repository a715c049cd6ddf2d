//! File formats: headerless CSV for matrices, JSON for manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces every value bit for bit and small integers
//! stay readable (`1,0` not `1.0000000000000000e0,0e0`).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{Connectome, SubjectManifest, TimeSeries};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a headerless comma-separated numeric matrix. Row/column positions
/// in errors are 1-based.
fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (r, line) in text.lines().enumerate() {
        let row = r + 1;
        let mut vals = Vec::with_capacity(width);
        for (c, tok) in line.split(',').enumerate() {
            let col = c + 1;
            let v: f64 = tok.trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                row,
                col,
                msg: format!("cannot parse {:?} as a number", tok.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    row,
                    col,
                    msg: format!("non-finite value {v}"),
                });
            }
            vals.push(v);
        }
        if row == 1 {
            width = vals.len();
        } else if vals.len() != width {
            return Err(Error::Format {
                path: path.to_path_buf(),
                row,
                col: vals.len(),
                msg: format!("expected {width} columns, found {}", vals.len()),
            });
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            row: 1,
            col: 1,
            msg: "file is empty".into(),
        });
    }
    let shape = (rows.len(), width);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec(shape, flat)
        .map_err(|e| Error::Dimension(format!("matrix shape {shape:?}: {e}")))
}

fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = Vec::with_capacity(m.len() * 8);
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(b',');
            }
            write!(out, "{v}").expect("write to Vec cannot fail");
            first = false;
        }
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Loads a time series (rows are timepoints, columns are channels),
/// optionally enforcing a channel count.
pub fn load_timeseries(
    path: impl AsRef<Path>,
    expected_channels: Option<usize>,
) -> Result<TimeSeries> {
    let ts = TimeSeries::new(read_matrix(path.as_ref())?)?;
    if let Some(want) = expected_channels {
        if ts.channels() != want {
            return Err(Error::Dimension(format!(
                "{} has {} channels, expected {want}",
                path.as_ref().display(),
                ts.channels()
            )));
        }
    }
    Ok(ts)
}

pub fn save_timeseries(path: impl AsRef<Path>, ts: &TimeSeries) -> Result<()> {
    write_matrix(path.as_ref(), ts.data())
}

/// Loads a connectome and re-runs the symmetry and range validation.
pub fn load_connectome(path: impl AsRef<Path>) -> Result<Connectome> {
    Connectome::new(read_matrix(path.as_ref())?, None)
}

pub fn save_connectome(path: impl AsRef<Path>, c: &Connectome) -> Result<()> {
    write_matrix(path.as_ref(), c.weights())
}

/// Loads a JSON manifest, resolves relative subject paths against the
/// manifest's directory and checks that each referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<SubjectManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut manifest: SubjectManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        row: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for s in &mut manifest.subjects {
        if s.path.is_relative() {
            s.path = base.join(&s.path);
        }
        if !s.path.is_file() {
            return Err(Error::Io {
                path: s.path.clone(),
                source: std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("time series for subject {:?} not found", s.id),
                ),
            });
        }
    }
    Ok(manifest)
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &SubjectManifest) -> Result<()> {
    let path = path.as_ref();
    manifest.validate()?;
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}
