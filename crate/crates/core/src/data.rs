//! Domain types shared across the crate, plus CSV ingestion and splitting.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, ShapeBuilder};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Marker observations for the diseased and healthy groups.
///
/// Rows are subjects, columns are markers. Both matrices are stored
/// column-major so that per-marker columns are contiguous, which is the access
/// pattern of the score and gradient kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct BiomarkerDataset {
    diseased: Array2<f64>,
    healthy: Array2<f64>,
    feature_names: Option<Vec<String>>,
}

fn to_column_major(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.dim().f());
    out.assign(&a);
    out
}

impl BiomarkerDataset {
    pub fn new(
        diseased: Array2<f64>,
        healthy: Array2<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let p = diseased.ncols();
        if diseased.nrows() == 0 {
            return Err(validation("diseased group has no observations"));
        }
        if healthy.nrows() == 0 {
            return Err(validation("healthy group has no observations"));
        }
        if p == 0 {
            return Err(validation("dataset has no marker columns"));
        }
        if healthy.ncols() != p {
            return Err(Error::Dimension {
                expected: p,
                found: healthy.ncols(),
            });
        }
        if let Some(names) = &feature_names {
            if names.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    found: names.len(),
                });
            }
        }
        if diseased.iter().chain(healthy.iter()).any(|x| !x.is_finite()) {
            return Err(validation("dataset contains non-finite entries"));
        }
        let diseased = if diseased.t().is_standard_layout() {
            diseased
        } else {
            to_column_major(diseased.view())
        };
        let healthy = if healthy.t().is_standard_layout() {
            healthy
        } else {
            to_column_major(healthy.view())
        };
        Ok(Self {
            diseased,
            healthy,
            feature_names,
        })
    }

    pub fn diseased(&self) -> ArrayView2<'_, f64> {
        self.diseased.view()
    }

    pub fn healthy(&self) -> ArrayView2<'_, f64> {
        self.healthy.view()
    }

    /// Number of diseased subjects (n₁).
    pub fn n_diseased(&self) -> usize {
        self.diseased.nrows()
    }

    /// Number of healthy subjects (n₀).
    pub fn n_healthy(&self) -> usize {
        self.healthy.nrows()
    }

    /// Number of markers.
    pub fn n_features(&self) -> usize {
        self.diseased.ncols()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Feature labels, falling back to `x1..xp`.
    pub fn feature_labels(&self) -> Vec<String> {
        match &self.feature_names {
            Some(names) => names.clone(),
            None => (1..=self.n_features()).map(|j| format!("x{j}")).collect(),
        }
    }

    /// Restrict to the given row subsets of each group, preserving order.
    pub fn subset(&self, diseased_rows: &[usize], healthy_rows: &[usize]) -> Result<Self> {
        Self::new(
            self.diseased.select(Axis(0), diseased_rows),
            self.healthy.select(Axis(0), healthy_rows),
            self.feature_names.clone(),
        )
    }

    /// Keep only the first `p` marker columns.
    pub fn truncate_features(&self, p: usize) -> Result<Self> {
        let p = p.min(self.n_features());
        Self::new(
            self.diseased.slice(s![.., ..p]).to_owned(),
            self.healthy.slice(s![.., ..p]).to_owned(),
            self.feature_names.as_ref().map(|n| n[..p].to_vec()),
        )
    }

    /// Combined scores `Xω` for the diseased and healthy groups.
    pub fn scores(&self, omega: ArrayView1<'_, f64>) -> (Array1<f64>, Array1<f64>) {
        (column_scores(self.diseased.view(), omega), column_scores(self.healthy.view(), omega))
    }
}

/// `Xω` accumulated column by column, skipping zero weights.
pub(crate) fn column_scores(x: ArrayView2<'_, f64>, omega: ArrayView1<'_, f64>) -> Array1<f64> {
    assert_eq!(x.ncols(), omega.len(), "rule length does not match marker count");
    let mut out = Array1::zeros(x.nrows());
    for (col, &w) in x.axis_iter(Axis(1)).zip(omega.iter()) {
        if w != 0.0 {
            out.scaled_add(w, &col);
        }
    }
    out
}

/// A linear decision rule `ωᵀT > c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePoint {
    pub omega: Array1<f64>,
    pub cutoff: f64,
}

impl RulePoint {
    pub fn new(omega: Array1<f64>, cutoff: f64) -> Self {
        Self { omega, cutoff }
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Stack as `(ω, c)`, length p + 1.
    pub fn to_vector(&self) -> Array1<f64> {
        let mut v = Array1::zeros(self.dim() + 1);
        v.slice_mut(s![..self.dim()]).assign(&self.omega);
        v[self.dim()] = self.cutoff;
        v
    }

    /// Inverse of [`RulePoint::to_vector`].
    ///
    /// # Panics
    /// If `v` is empty.
    pub fn from_vector(v: ArrayView1<'_, f64>) -> Self {
        let p = v.len() - 1;
        Self {
            omega: v.slice(s![..p]).to_owned(),
            cutoff: v[p],
        }
    }

    pub fn omega_norm(&self) -> f64 {
        self.omega.dot(&self.omega).sqrt()
    }

    pub fn nonzero_count(&self) -> usize {
        self.omega.iter().filter(|w| **w != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.cutoff.is_finite() && self.omega.iter().all(|w| w.is_finite())
    }
}

/// Model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Weight on sensitivity.
    pub pi: f64,
    /// Smoothing bandwidth.
    pub bandwidth: f64,
    /// SCAD penalty level on the marker weights.
    pub lambda1: f64,
    /// Ridge weight on the cutoff.
    pub lambda2: f64,
    /// SCAD shape parameter.
    pub scad_a: f64,
}

impl HyperParams {
    pub const DEFAULT_SCAD_A: f64 = 3.7;
    pub const DEFAULT_LAMBDA2: f64 = 1e-6;

    pub fn new(pi: f64, bandwidth: f64, lambda1: f64) -> Result<Self> {
        let hp = Self {
            pi,
            bandwidth,
            lambda1,
            lambda2: Self::DEFAULT_LAMBDA2,
            scad_a: Self::DEFAULT_SCAD_A,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(validation(format!("pi must lie in (0, 1), got {}", self.pi)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(validation(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(validation(format!("lambda1 must be >= 0, got {}", self.lambda1)));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(validation(format!("lambda2 must be >= 0, got {}", self.lambda2)));
        }
        if !(self.scad_a > 2.0 && self.scad_a.is_finite()) {
            return Err(validation(format!("SCAD shape must exceed 2, got {}", self.scad_a)));
        }
        Ok(())
    }
}

/// Classification performance of a rule on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub weighted_youden: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Fraction of truly nonzero weights estimated nonzero.
    pub detection_rate: Option<f64>,
    /// Fraction of truly zero weights estimated exactly zero.
    pub shrinkage_accuracy: Option<f64>,
    pub nonzero_count: usize,
}

/// Read a labelled CSV file. Rows whose label equals `positive_label` form the
/// diseased group; every other column must be numeric and finite.
pub fn load_dataset(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_label: &str,
) -> Result<BiomarkerDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| validation(format!("label column `{label_column}` not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let p = feature_names.len();

    let mut labels: Vec<String> = Vec::new();
    let mut diseased = Vec::new();
    let mut healthy = Vec::new();
    let (mut n1, mut n0) = (0usize, 0usize);
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                row,
                column: headers.get(record.len().min(headers.len() - 1)).unwrap_or("").to_string(),
                message: format!("expected {} cells, found {}", headers.len(), record.len()),
            });
        }
        let label = record[label_idx].trim();
        if label.is_empty() {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                row,
                column: label_column.to_string(),
                message: "missing label".into(),
            });
        }
        if !labels.iter().any(|l| l == label) {
            labels.push(label.to_string());
            if labels.len() > 2 {
                return Err(validation(format!(
                    "label column `{label_column}` has more than two distinct values ({})",
                    labels.join(", ")
                )));
            }
        }
        let target = if label == positive_label {
            n1 += 1;
            &mut diseased
        } else {
            n0 += 1;
            &mut healthy
        };
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let cell = cell.trim();
            let bad = |message: &str| Error::Ingestion {
                path: path.to_path_buf(),
                row,
                column: headers[j].trim().to_string(),
                message: message.to_string(),
            };
            if cell.is_empty() {
                return Err(bad("missing value"));
            }
            let x: f64 = cell.parse().map_err(|_| bad(&format!("not a number: `{cell}`")))?;
            if !x.is_finite() {
                return Err(bad(&format!("non-finite value `{cell}`")));
            }
            target.push(x);
        }
    }
    if !labels.iter().any(|l| l == positive_label) {
        return Err(validation(format!("positive label `{positive_label}` does not occur")));
    }
    if labels.len() < 2 {
        return Err(validation("label column has a single class"));
    }
    let diseased = Array2::from_shape_vec((n1, p), diseased).expect("row-major buffer");
    let healthy = Array2::from_shape_vec((n0, p), healthy).expect("row-major buffer");
    BiomarkerDataset::new(diseased, healthy, Some(feature_names))
}

/// Write a dataset as CSV with a trailing `label` column (1 = diseased, 0 = healthy).
///
/// Values use the shortest representation that parses back to the same `f64`.
pub fn write_dataset(path: impl AsRef<Path>, data: &BiomarkerDataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    write_dataset_to(&mut writer, data)?;
    writer.flush()?;
    Ok(())
}

pub fn write_dataset_to<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    data: &BiomarkerDataset,
) -> Result<()> {
    let mut header = data.feature_labels();
    header.push("label".into());
    writer.write_record(&header)?;
    for (group, label) in [(data.diseased(), "1"), (data.healthy(), "0")] {
        for row in group.rows() {
            let mut rec: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            rec.push(label.into());
            writer.write_record(&rec)?;
        }
    }
    Ok(())
}

/// Row indices of one stratified split: `(train, test)` per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub diseased: (Vec<usize>, Vec<usize>),
    pub healthy: (Vec<usize>, Vec<usize>),
}

fn split_group(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(validation(format!("cannot split a group of {n} observation(s)")));
    }
    let k = ((n as f64) * fraction).round().clamp(1.0, (n - 1) as f64) as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (a, b) = idx.split_at(k);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

/// Stratified split indices: each group is shuffled independently and the
/// first `round(n·fraction)` rows (at least one, at most n − 1) go to training.
pub fn split_indices(data: &BiomarkerDataset, fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(validation(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SplitIndices {
        diseased: split_group(data.n_diseased(), fraction, &mut rng)?,
        healthy: split_group(data.n_healthy(), fraction, &mut rng)?,
    })
}

/// Stratified train/test split, deterministic in `seed`.
pub fn split_train_test(
    data: &BiomarkerDataset,
    fraction: f64,
    seed: u64,
) -> Result<(BiomarkerDataset, BiomarkerDataset)> {
    let idx = split_indices(data, fraction, seed)?;
    Ok((
        data.subset(&idx.diseased.0, &idx.healthy.0)?,
        data.subset(&idx.diseased.1, &idx.healthy.1)?,
    ))
}
