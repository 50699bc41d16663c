//! Instance file ingestion and export.
//!
//! Two formats:
//! - coordinate CSV with header `id,x1..xd[,demand_mult]`; ids are the
//!   0-based row index, demand multiplicity defaults to 1;
//! - distance-matrix JSON `{ "n", "matrix" (row-major), "demand" }`.
//!
//! Exports write the canonical form of the same formats, so
//! ingest -> export is a fixed point on canonical files. Floats use
//! shortest-round-trip formatting, which re-reads to the identical bits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dpcluster_core::{Geometry, MetricInstance};

use crate::config::InputFormat;
use crate::{HarnessError, Result};

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

pub fn infer_format(path: &Path) -> Result<InputFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(InputFormat::Csv),
        Some("json") => Ok(InputFormat::Matrix),
        other => Err(HarnessError::Config(format!(
            "cannot infer input format from extension {other:?}; pass --format"
        ))),
    }
}

pub fn ingest(path: &Path, format: InputFormat, k: usize, power: f64) -> Result<MetricInstance> {
    match format {
        InputFormat::Csv => ingest_csv(path, k, power),
        InputFormat::Matrix => ingest_matrix(path, k, power),
    }
}

fn ingest_csv(path: &Path, k: usize, power: f64) -> Result<MetricInstance> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::Ingest(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| HarnessError::Ingest(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() || &headers[0] != "id" {
        return Err(HarnessError::Ingest(format!(
            "{}: first column must be `id`, found {:?}",
            path.display(),
            headers.iter().next().unwrap_or("")
        )));
    }
    let has_mult = headers.iter().last() == Some("demand_mult");
    let coord_cols = headers.len() - 1 - usize::from(has_mult);
    if coord_cols == 0 {
        return Err(HarnessError::Ingest(format!(
            "{}: no coordinate columns between `id` and `demand_mult`",
            path.display()
        )));
    }

    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut demand: Vec<usize> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| HarnessError::Ingest(format!("{} row {row}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(HarnessError::Ingest(format!(
                "{} row {row}: expected {} fields, found {}",
                path.display(),
                headers.len(),
                record.len()
            )));
        }
        let id: usize = record[0].parse().map_err(|_| {
            HarnessError::Ingest(format!(
                "{} row {row}: id `{}` is not an integer",
                path.display(),
                &record[0]
            ))
        })?;
        if id != row {
            return Err(HarnessError::Ingest(format!(
                "{} row {row}: id {id} must equal the row index",
                path.display()
            )));
        }
        let mut point = Vec::with_capacity(coord_cols);
        for c in 0..coord_cols {
            let field = &record[1 + c];
            let x: f64 = field.parse().map_err(|_| {
                HarnessError::Ingest(format!(
                    "{} row {row}, column {}: `{field}` is not a number",
                    path.display(),
                    &headers[1 + c]
                ))
            })?;
            point.push(x);
        }
        coords.push(point);
        let mult: u64 = if has_mult {
            let field = &record[headers.len() - 1];
            field.parse().map_err(|_| {
                HarnessError::Ingest(format!(
                    "{} row {row}: demand_mult `{field}` is not a nonnegative integer",
                    path.display()
                ))
            })?
        } else {
            1
        };
        for _ in 0..mult {
            demand.push(row);
        }
    }

    Ok(MetricInstance::euclidean(coords, demand, k, power)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    matrix: Vec<f64>,
    demand: Vec<usize>,
}

fn ingest_matrix(path: &Path, k: usize, power: f64) -> Result<MetricInstance> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: MatrixFile = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Ingest(format!("{}: {e}", path.display())))?;
    Ok(MetricInstance::from_matrix(file.n, file.matrix, file.demand, k, power)?)
}

/// Writes the canonical coordinate CSV for a Euclidean instance.
pub fn export_csv(inst: &MetricInstance, path: &Path) -> Result<()> {
    let coords = inst.geometry().coords().ok_or_else(|| {
        HarnessError::Config("CSV export needs a Euclidean instance; use matrix JSON".to_string())
    })?;
    let dim = coords[0].len();
    let mut mult = vec![0u64; coords.len()];
    for &d in inst.demand() {
        mult[d] += 1;
    }
    let mut out = String::from("id");
    for c in 0..dim {
        out.push_str(&format!(",x{}", c + 1));
    }
    out.push_str(",demand_mult\n");
    for (i, point) in coords.iter().enumerate() {
        out.push_str(&i.to_string());
        for x in point {
            out.push(',');
            out.push_str(&format!("{x}"));
        }
        out.push_str(&format!(",{}\n", mult[i]));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes the matrix-JSON form, computing pairwise distances when the
/// instance is Euclidean.
pub fn export_matrix_json(inst: &MetricInstance, path: &Path) -> Result<()> {
    let n = inst.n_points();
    let matrix = match inst.geometry() {
        Geometry::Matrix { entries, .. } => entries.clone(),
        Geometry::Euclidean { .. } => {
            let mut entries = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    entries[i * n + j] = inst.distance(i, j)?;
                }
            }
            entries
        }
    };
    let file = MatrixFile { n, matrix, demand: inst.demand().to_vec() };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| io_err(path, e))
}

/// Validation summary for the `validate` subcommand.
#[derive(Debug, Serialize)]
pub struct ValidationSummary {
    pub ok: bool,
    pub format: InputFormat,
    pub n: usize,
    pub dimension: Option<usize>,
    pub demand_size: usize,
    pub diameter: f64,
}

pub fn validate_file(path: &Path, format: Option<InputFormat>) -> Result<ValidationSummary> {
    let format = match format {
        Some(f) => f,
        None => infer_format(path)?,
    };
    // k = 1, p = 1 placeholders: file formats carry no solve parameters
    let inst = ingest(path, format, 1, 1.0)?;
    Ok(ValidationSummary {
        ok: true,
        format,
        n: inst.n_points(),
        dimension: inst.geometry().coords().map(|c| c[0].len()),
        demand_size: inst.demand().len(),
        diameter: inst.diameter(dpcluster_core::DiameterMode::Exact),
    })
}
