//! Interchange formats: Gaussians as JSON, point clouds as CSV or JSON,
//! coupling plans as dense CSV.
//!
//! Parse failures split into schema errors (malformed document, with a
//! line/field diagnostic) and numerical errors (well-formed but unusable
//! values, e.g. an indefinite covariance) so callers can map them to
//! different exit codes. Floats are written with Rust's shortest
//! round-trip formatting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discrete::CouplingPlan;
use crate::error::GwError;
use crate::gaussian::{GaussianMeasure, PointCloud};
use crate::spectral::SymmetricMatrix;

/// A malformed input document: says where and what.
#[derive(Debug, Clone)]
pub struct SchemaError {
    pub detail: String,
    /// 1-based line when known (JSON parse errors, CSV rows).
    pub line: Option<usize>,
    /// Offending field or column when known.
    pub field: Option<String>,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "schema error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in field '{field}'")?;
        }
        write!(f, ": {}", self.detail)
    }
}

impl std::error::Error for SchemaError {}

impl SchemaError {
    fn new(detail: impl Into<String>) -> Self {
        Self {
            detail: detail.into(),
            line: None,
            field: None,
        }
    }

    fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    fn with_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

/// Input failure: either the document is malformed (schema) or the values
/// are numerically unusable.
#[derive(Debug)]
pub enum InputError {
    Schema(SchemaError),
    Numerical(GwError),
}

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputError::Schema(e) => write!(f, "{e}"),
            InputError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for InputError {}

fn schema(e: SchemaError) -> InputError {
    InputError::Schema(e)
}

/// `{"mean": [..], "cov": [[..], ..]}` with row-major covariance.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianJson {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

pub fn gaussian_from_json(text: &str) -> Result<GaussianMeasure, InputError> {
    let parsed: GaussianJson = serde_json::from_str(text)
        .map_err(|e| schema(SchemaError::new(e.to_string()).with_line(e.line())))?;
    let dim = parsed.mean.len();
    if dim == 0 {
        return Err(schema(
            SchemaError::new("mean must be non-empty").with_field("mean"),
        ));
    }
    if parsed.cov.len() != dim {
        return Err(schema(
            SchemaError::new(format!("cov has {} rows, expected {dim}", parsed.cov.len()))
                .with_field("cov"),
        ));
    }
    for (i, row) in parsed.cov.iter().enumerate() {
        if row.len() != dim {
            return Err(schema(
                SchemaError::new(format!(
                    "cov row {i} has length {}, expected {dim} (ragged rows rejected)",
                    row.len()
                ))
                .with_field("cov"),
            ));
        }
    }
    let cov = SymmetricMatrix::from_rows(&parsed.cov).map_err(InputError::Numerical)?;
    GaussianMeasure::new(DVector::from_vec(parsed.mean), cov).map_err(InputError::Numerical)
}

pub fn gaussian_to_json(g: &GaussianMeasure) -> String {
    let doc = GaussianJson {
        mean: g.mean().iter().copied().collect(),
        cov: (0..g.dim())
            .map(|i| g.covariance().as_matrix().row(i).iter().copied().collect())
            .collect(),
    };
    serde_json::to_string(&doc).expect("plain floats always serialize")
}

/// `{"points": [[..], ..], "weights": [..]}`; weights optional (uniform
/// when absent).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CloudJson {
    points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

pub fn cloud_from_json(text: &str) -> Result<PointCloud, InputError> {
    let parsed: CloudJson = serde_json::from_str(text)
        .map_err(|e| schema(SchemaError::new(e.to_string()).with_line(e.line())))?;
    let k = parsed.points.len();
    if k == 0 {
        return Err(schema(
            SchemaError::new("points must be non-empty").with_field("points"),
        ));
    }
    let d = parsed.points[0].len();
    for (i, row) in parsed.points.iter().enumerate() {
        if row.len() != d {
            return Err(schema(
                SchemaError::new(format!(
                    "point {i} has {} coordinates, expected {d}",
                    row.len()
                ))
                .with_field("points"),
            ));
        }
    }
    let points = DMatrix::from_fn(k, d, |i, j| parsed.points[i][j]);
    match parsed.weights {
        Some(w) => {
            if w.len() != k {
                return Err(schema(
                    SchemaError::new(format!("{} weights for {k} points", w.len()))
                        .with_field("weights"),
                ));
            }
            PointCloud::new(points, DVector::from_vec(w)).map_err(InputError::Numerical)
        }
        None => PointCloud::uniform(points).map_err(InputError::Numerical),
    }
}

pub fn cloud_to_json(cloud: &PointCloud) -> String {
    let doc = CloudJson {
        points: (0..cloud.len())
            .map(|i| cloud.points().row(i).iter().copied().collect())
            .collect(),
        weights: Some(cloud.weights().iter().copied().collect()),
    };
    serde_json::to_string(&doc).expect("plain floats always serialize")
}

/// Parse a CSV point cloud: one point per row, comma-separated coordinates.
/// With `weighted` set, the last column holds the weight of each point;
/// otherwise weights are uniform. Blank lines and `#` comments are skipped.
pub fn cloud_from_csv(text: &str, weighted: bool) -> Result<PointCloud, InputError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (col, cell) in trimmed.split(',').enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                schema(
                    SchemaError::new(format!("'{}' is not a number", cell.trim()))
                        .with_line(line_no + 1)
                        .with_field(format!("column {}", col + 1)),
                )
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(schema(
                    SchemaError::new(format!("row has {} columns, expected {w}", row.len()))
                        .with_line(line_no + 1),
                ));
            }
            _ => {}
        }
        rows.push(row);
    }
    let k = rows.len();
    let width = width.ok_or_else(|| schema(SchemaError::new("no data rows in CSV input")))?;
    let d = if weighted {
        if width < 2 {
            return Err(schema(SchemaError::new(
                "weighted CSV needs at least one coordinate column plus the weight column",
            )));
        }
        width - 1
    } else {
        width
    };
    let points = DMatrix::from_fn(k, d, |i, j| rows[i][j]);
    if weighted {
        let weights = DVector::from_fn(k, |i, _| rows[i][width - 1]);
        PointCloud::new(points, weights).map_err(InputError::Numerical)
    } else {
        PointCloud::uniform(points).map_err(InputError::Numerical)
    }
}

/// Shortest round-trip decimal form of a float (Rust's default `Display`).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn cloud_to_csv(cloud: &PointCloud, with_weights: bool) -> String {
    let mut out = String::new();
    for i in 0..cloud.len() {
        let mut cells: Vec<String> = cloud
            .points()
            .row(i)
            .iter()
            .map(|&v| fmt_f64(v))
            .collect();
        if with_weights {
            cells.push(fmt_f64(cloud.weights()[i]));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Dense CSV export of a coupling matrix, one source row per line.
pub fn plan_to_csv(plan: &CouplingPlan) -> String {
    let m = plan.matrix();
    let mut out = String::new();
    for i in 0..m.nrows() {
        let cells: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_json_round_trip() {
        let text = r#"{"mean":[1.0,2.0],"cov":[[2.0,0.5],[0.5,1.0]]}"#;
        let g = gaussian_from_json(text).unwrap();
        assert_eq!(g.dim(), 2);
        let again = gaussian_from_json(&gaussian_to_json(&g)).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn gaussian_json_rejects_ragged_rows() {
        let text = r#"{"mean":[1.0,2.0],"cov":[[2.0,0.5],[0.5]]}"#;
        match gaussian_from_json(text) {
            Err(InputError::Schema(e)) => assert_eq!(e.field.as_deref(), Some("cov")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_json_rejects_unknown_fields() {
        let text = r#"{"mean":[1.0],"cov":[[1.0]],"extra":3}"#;
        assert!(matches!(
            gaussian_from_json(text),
            Err(InputError::Schema(_))
        ));
    }

    #[test]
    fn gaussian_json_reports_parse_line() {
        let text = "{\"mean\":[1.0],\n\"cov\":[[oops]]}";
        match gaussian_from_json(text) {
            Err(InputError::Schema(e)) => assert_eq!(e.line, Some(2)),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn indefinite_covariance_is_a_numerical_error() {
        let text = r#"{"mean":[0.0,0.0],"cov":[[1.0,2.0],[2.0,1.0]]}"#;
        match gaussian_from_json(text) {
            Err(InputError::Numerical(GwError::NotPsd(_))) => {}
            other => panic!("expected numerical NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn cloud_csv_round_trip() {
        let text = "0.0,1.0\n2.0,3.0\n# comment\n4.0,5.0\n";
        let cloud = cloud_from_csv(text, false).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.dim(), 2);
        let back = cloud_to_csv(&cloud, false);
        let again = cloud_from_csv(&back, false).unwrap();
        assert_eq!(cloud, again);
    }

    #[test]
    fn weighted_csv_uses_last_column() {
        let text = "0.0,0.25\n1.0,0.75\n";
        let cloud = cloud_from_csv(text, true).unwrap();
        assert_eq!(cloud.dim(), 1);
        assert_eq!(cloud.weights()[1], 0.75);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "0.0,1.0\n2.0,oops\n";
        match cloud_from_csv(text, false) {
            Err(InputError::Schema(e)) => assert_eq!(e.line, Some(2)),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn cloud_json_round_trip() {
        let text = r#"{"points":[[0.0],[1.0]],"weights":[0.5,0.5]}"#;
        let cloud = cloud_from_json(text).unwrap();
        let again = cloud_from_json(&cloud_to_json(&cloud)).unwrap();
        assert_eq!(cloud, again);
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v, back);
        }
    }
}
