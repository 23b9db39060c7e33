//! Core data types: feature clouds, label vectors, observable reports, and
//! their file formats (snapshot CSV, report JSON).

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonfmt;

/// An n×d cloud of representation points, one row per point.
///
/// All entries are finite; `n ≥ 1` and `d ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud {
    points: DMatrix<f64>,
}

impl FeatureCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidInput(
                "feature cloud needs at least one point and one dimension".into(),
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature".into()));
        }
        Ok(Self { points })
    }

    /// Build a cloud from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("feature cloud has no points".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        let mut m = DMatrix::zeros(rows.len(), d);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// The i-th point as a column vector.
    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    /// max_i ‖z_i‖, the radius bound used by the perturbation theory.
    pub fn max_norm(&self) -> f64 {
        (0..self.n())
            .map(|i| self.points.row(i).norm())
            .fold(0.0, f64::max)
    }

    /// ‖Z − Z̃‖∞ = max_i ‖z_i − z̃_i‖ over paired points.
    pub fn max_displacement(&self, other: &FeatureCloud) -> Result<f64> {
        if self.n() != other.n() || self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(format!(
                "clouds {}x{} vs {}x{}",
                self.n(),
                self.dim(),
                other.n(),
                other.dim()
            )));
        }
        Ok((0..self.n())
            .map(|i| (self.points.row(i) - other.points.row(i)).norm())
            .fold(0.0, f64::max))
    }
}

/// Class labels in {0, …, K−1} paired with a feature cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    /// Labels with an explicit class count `K`; every label must be < K.
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("label vector is empty".into()));
        }
        if num_classes < 1 {
            return Err(Error::InvalidInput("need at least one class".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    /// Infer `K = 1 + max(label)`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map(|&m| m + 1).unwrap_or(0);
        Self::new(labels, k.max(1))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Point indices of each class, in point order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i);
        }
        members
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Error unless every class has at least `min_size` points.
    pub fn require_class_size(&self, min_size: usize) -> Result<()> {
        for (class, count) in self.class_counts().iter().enumerate() {
            if *count < min_size {
                return Err(Error::ClassTooSmall(class, min_size));
            }
        }
        Ok(())
    }
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Load a labeled snapshot from CSV: header row required, one row per point,
/// features in column order with the label column removed.
pub fn load_snapshot_csv(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
) -> Result<(FeatureCloud, LabelVector)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(parse_err(path, "empty file"));
    }
    let label_idx = match label_column {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, format!("label column '{name}' not found")))?,
        LabelColumn::Index(idx) => {
            if *idx >= headers.len() {
                return Err(parse_err(
                    path,
                    format!("label column index {idx} out of range ({} columns)", headers.len()),
                ));
            }
            *idx
        }
    };
    if headers.len() < 2 {
        return Err(parse_err(path, "need at least one feature column"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, format!("row {}: {e}", rec_idx + 1)))?;
        let mut features = Vec::with_capacity(headers.len() - 1);
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(parse_label(path, rec_idx, cell)?);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    parse_err(
                        path,
                        format!("row {}, column '{}': non-numeric feature '{cell}'", rec_idx + 1, &headers[col]),
                    )
                })?;
                if !v.is_finite() {
                    return Err(parse_err(
                        path,
                        format!("row {}, column '{}': non-finite feature", rec_idx + 1, &headers[col]),
                    ));
                }
                features.push(v);
            }
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "empty file (no data rows)"));
    }

    let cloud = FeatureCloud::from_rows(&rows)?;
    let labels = LabelVector::from_labels(labels)?;
    if labels.len() != cloud.n() {
        return Err(Error::ShapeMismatch("labels vs points".into()));
    }
    Ok((cloud, labels))
}

fn parse_label(path: &Path, row: usize, cell: &str) -> Result<usize> {
    let v: f64 = cell.parse().map_err(|_| {
        parse_err(path, format!("row {}: non-numeric label '{cell}'", row + 1))
    })?;
    if !v.is_finite() || v.fract() != 0.0 {
        return Err(parse_err(
            path,
            format!("row {}: non-integer label '{cell}'", row + 1),
        ));
    }
    if v < 0.0 {
        return Err(parse_err(
            path,
            format!("row {}: negative label '{cell}'", row + 1),
        ));
    }
    Ok(v as usize)
}

/// Write a snapshot in the canonical CSV layout (`f0..f{d-1},label`),
/// with features at full f64 precision.
pub fn write_snapshot_csv(
    cloud: &FeatureCloud,
    labels: &LabelVector,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if labels.len() != cloud.n() {
        return Err(Error::ShapeMismatch("labels vs points".into()));
    }
    let mut out = String::new();
    for j in 0..cloud.dim() {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for i in 0..cloud.n() {
        for j in 0..cloud.dim() {
            out.push_str(&format!("{:.16e},", cloud.points()[(i, j)]));
        }
        out.push_str(&format!("{}\n", labels.label(i)));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Scalar and matrix observables computed from one snapshot at one bandwidth.
///
/// Matrices are stored row-major; `separation_matrix` and `coarse_chain` are
/// both K×K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableReport {
    pub bandwidth: f64,
    pub mean_separation: f64,
    pub separation_matrix: Vec<Vec<f64>>,
    pub leakage_stationary: f64,
    pub leakage_raw: f64,
    pub coarse_gap: f64,
    pub label_boundary_energy: f64,
    pub soft_radius_rms: f64,
    pub coarse_chain: Vec<Vec<f64>>,
}

impl ObservableReport {
    pub fn validate(&self) -> Result<()> {
        let k = self.separation_matrix.len();
        if k == 0 || self.separation_matrix.iter().any(|r| r.len() != k) {
            return Err(Error::ShapeMismatch("separation_matrix must be K×K".into()));
        }
        if self.coarse_chain.len() != k || self.coarse_chain.iter().any(|r| r.len() != k) {
            return Err(Error::ShapeMismatch("coarse_chain must be K×K".into()));
        }
        let all = self
            .separation_matrix
            .iter()
            .chain(self.coarse_chain.iter())
            .flatten()
            .chain([
                &self.bandwidth,
                &self.mean_separation,
                &self.leakage_stationary,
                &self.leakage_raw,
                &self.coarse_gap,
                &self.label_boundary_energy,
                &self.soft_radius_rms,
            ]);
        for v in all {
            if !v.is_finite() {
                return Err(Error::NonFinite("report field".into()));
            }
        }
        if self.bandwidth <= 0.0 {
            return Err(Error::InvalidInput("report bandwidth must be positive".into()));
        }
        for i in 0..k {
            if self.separation_matrix[i][i] != 0.0 {
                return Err(Error::InvalidInput("separation matrix diagonal must be zero".into()));
            }
            for j in 0..k {
                if (self.separation_matrix[i][j] - self.separation_matrix[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidInput("separation matrix must be symmetric".into()));
                }
            }
            let row_sum: f64 = self.coarse_chain[i].iter().sum();
            if (row_sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!(
                    "coarse chain row {i} sums to {row_sum}, expected 1"
                )));
            }
        }
        for (name, v) in [
            ("leakage_stationary", self.leakage_stationary),
            ("leakage_raw", self.leakage_raw),
        ] {
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} = {v} outside [0,1]")));
            }
        }
        if self.soft_radius_rms < 0.0 || self.mean_separation < 0.0 {
            return Err(Error::InvalidInput("negative radius or separation".into()));
        }
        Ok(())
    }
}

/// Write a report as deterministic JSON (fixed key order, 17-digit floats).
pub fn write_report_json(report: &ObservableReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    report.validate()?;
    let json = jsonfmt::to_json_string(report)?;
    fs::write(path, json).map_err(|e| io_err(path, e))
}

/// Read a report written by [`write_report_json`]; unknown keys are ignored.
pub fn read_report_json(path: impl AsRef<Path>) -> Result<ObservableReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let report: ObservableReport =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    report.validate()?;
    Ok(report)
}

/// Row-major nested copy of a dense matrix, for report serialization.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
