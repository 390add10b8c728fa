//! Artifact formats: legacy ASCII VTK, CSV tables and the JSON ensemble
//! manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::mesh::{MeshError, TriMesh};
use crate::montecarlo::{EnsembleResult, RealizationRecord};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(file_error(dir))?;
    }
    fs::write(path, text).map_err(file_error(path))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(file_error(path))
}

/// Legacy ASCII VTK unstructured grid of triangles with nodal scalars.
/// Values are printed in shortest round-trip form (`{:?}`), so reading the file
/// back is exact.
pub fn vtk_string(mesh: &TriMesh, fields: &[(&str, &[f64])]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nstochastic fracture\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:?} {:?} 0", p[0], p[1]);
    }
    let n_tri = mesh.triangles().len();
    let _ = writeln!(s, "CELLS {} {}", n_tri, 4 * n_tri);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {n_tri}");
    for _ in 0..n_tri {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        for (name, values) in fields {
            let _ = writeln!(s, "SCALARS {name} float 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:?}");
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &TriMesh, fields: &[(&str, &[f64])]) -> Result<(), IoError> {
    if let Some((name, v)) = fields.iter().find(|(_, v)| v.len() != mesh.n_nodes()) {
        return Err(format_error(path, format!("field {name} has {} values for {} nodes", v.len(), mesh.n_nodes())));
    }
    write_text(path, &vtk_string(mesh, fields))
}

/// Reads the nodal scalar `name` from a legacy ASCII VTK file.
pub fn read_vtk_scalars(path: &Path, name: &str) -> Result<Vec<f64>, IoError> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let mut n_points = None;
    while let Some(line) = lines.next() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("POINT_DATA") => {
                n_points = words.next().and_then(|w| w.parse::<usize>().ok());
            }
            Some("SCALARS") if words.next() == Some(name) => {
                let n = n_points.ok_or_else(|| format_error(path, "SCALARS before POINT_DATA"))?;
                let mut values = Vec::with_capacity(n);
                for line in lines.by_ref() {
                    if line.starts_with("LOOKUP_TABLE") {
                        continue;
                    }
                    for w in line.split_whitespace() {
                        values.push(w.parse::<f64>().map_err(|e| format_error(path, format!("bad value '{w}': {e}")))?);
                    }
                    if values.len() >= n {
                        break;
                    }
                }
                if values.len() != n {
                    return Err(format_error(path, format!("expected {n} values of {name}, found {}", values.len())));
                }
                return Ok(values);
            }
            _ => {}
        }
    }
    Err(format_error(path, format!("no point scalar named {name}")))
}

/// CSV with a header row; every row must match the header width.
pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), IoError> {
    if let Some(row) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(format_error(path, format!("row of {} values under {} columns", row.len(), header.len())));
    }
    write_text(path, &csv_string(header, rows))
}

/// Header and numeric rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| format_error(path, "empty file"))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| {
            let row = l
                .split(',')
                .map(|w| w.trim().parse::<f64>().map_err(|e| format_error(path, format!("bad value '{w}': {e}"))))
                .collect::<Result<Vec<f64>, _>>()?;
            if row.len() == header.len() {
                Ok(row)
            } else {
                Err(format_error(path, format!("row of {} values under {} columns", row.len(), header.len())))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

/// Column `name` of a CSV file.
pub fn read_csv_column(path: &Path, name: &str) -> Result<Vec<f64>, IoError> {
    let (header, rows) = read_csv(path)?;
    let k = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| format_error(path, format!("no column {name}")))?;
    Ok(rows.into_iter().map(|r| r[k]).collect())
}

/// One JSON document describing a finished run. File references are
/// relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    /// Labels the classifier can produce besides `other` and `failed`.
    pub label_set: Vec<String>,
    /// Nominal mesh of 2D runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    /// Node coordinates of 1D runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    pub ensemble: EnsembleResult,
}

impl Manifest {
    pub fn records(&self) -> &[RealizationRecord] {
        &self.ensemble.records
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        write_text(path, &self.to_json()?)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }
}

/// Wall-clock data kept apart from the manifest so that reruns stay
/// byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub workers: usize,
    pub wall_time_s: f64,
    pub realization_s: Vec<f64>,
}

impl Timing {
    pub fn of(ensemble: &EnsembleResult, workers: usize) -> Self {
        Self {
            workers,
            wall_time_s: ensemble.wall_time.as_secs_f64(),
            realization_s: ensemble.records.iter().map(|r| r.elapsed.as_secs_f64()).collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}
