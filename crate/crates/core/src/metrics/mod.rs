//! Sample-based diagnostics: Wasserstein distances, constraint satisfaction,
//! ground-truth sampling and empirical convergence orders.

mod order;
mod rejection;
mod wasserstein;

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::constraints::ConstraintSet;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;

pub use order::{
    contraction_fit, exact_kernel_bias, fit_order, stationary_covariance, strong_error,
    strong_error_ladder, weak_bias_ladder, OrderFit, StrongLadder, WeakLadder, STRONG_REFINEMENT,
};
pub use rejection::{rejection_sample_target, RejectionSample, ACCEPTANCE_FLOOR, PROBE_BATCH};
pub use wasserstein::{min_cost_assignment, wasserstein, MAX_ASSIGNMENT_POINTS};

/// A nonempty list of equally weighted points of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vector>,
}

impl SampleSet {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyDataset)?;
        let dim = first.len();
        for p in &points {
            check_dim(dim, p.len())?;
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("samples", "non-finite coordinate"));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn mean(&self) -> Vector {
        self.points
            .iter()
            .fold(Vector::zeros(self.dim()), |acc, p| acc + p)
            / self.len() as f64
    }

    /// Every `stride`-th point, for bringing large sets under the assignment cap.
    pub fn thin(&self, stride: usize) -> Self {
        Self {
            points: self.points.iter().step_by(stride.max(1)).cloned().collect(),
        }
    }

    /// Reads a CSV with a header. Trace files contribute their `theta_*` columns;
    /// any other file contributes every column.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let theta_cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("theta_"))
            .map(|(i, _)| i)
            .collect();
        let cols: Vec<usize> = if theta_cols.is_empty() {
            (0..headers.len()).collect()
        } else {
            theta_cols
        };
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = cols
                .iter()
                .map(|&i| {
                    rec.get(i)
                        .ok_or_else(|| Error::param("csv", "short row"))
                        .and_then(|s| {
                            s.trim()
                                .parse::<f64>()
                                .map_err(|e| Error::param("csv", e.to_string()))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(Vector::from_vec(vals));
        }
        Self::new(points)
    }

    /// CSV with header `x_1..x_p`.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.dim()).map(|i| format!("x_{i}")))?;
        for p in &self.points {
            w.write_record(p.iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<samples>", e))
    }
}

/// Fraction of samples that lie in `set`.
pub fn inside_fraction(samples: &SampleSet, set: &ConstraintSet) -> Result<f64> {
    check_dim(set.dim(), samples.dim())?;
    let inside = samples
        .points()
        .iter()
        .filter(|p| set.contains_unchecked(p))
        .count();
    Ok(inside as f64 / samples.len() as f64)
}

/// One metric value with a digest of the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub metric: String,
    pub inputs_digest: String,
    pub value: Option<f64>,
    /// Why `value` is missing, when it is.
    pub unavailable: Option<String>,
    pub diagnostics: serde_json::Value,
}

impl MetricRecord {
    pub fn new(
        metric: &str,
        inputs: &str,
        value: Option<f64>,
        diagnostics: serde_json::Value,
    ) -> Self {
        Self {
            metric: metric.to_string(),
            inputs_digest: sha256_hex(inputs.as_bytes()),
            value,
            unavailable: None,
            diagnostics,
        }
    }

    pub fn unavailable(metric: &str, inputs: &str, reason: impl Into<String>) -> Self {
        Self {
            metric: metric.to_string(),
            inputs_digest: sha256_hex(inputs.as_bytes()),
            value: None,
            unavailable: Some(reason.into()),
            diagnostics: serde_json::Value::Null,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
