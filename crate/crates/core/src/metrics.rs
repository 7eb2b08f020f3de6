//! Evaluation metrics: mask IoU, position RMSE, angle MAE with wrap-around,
//! distance-binned error curves and angle-binned error histograms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_deg, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("mask dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch { a_w: usize, a_h: usize, b_w: usize, b_h: usize },
    #[error("mask data has {got} cells, expected {expected}")]
    MaskSize { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("bin width must be positive, got {0}")]
    BinWidth(f64),
    #[error("invalid sample at index {index}: {reason}")]
    InvalidSample { index: usize, reason: &'static str },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(MetricsError::MaskSize { expected: width * height, got: bits.len() });
        }
        Ok(Mask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask { width, height, bits: vec![false; width * height] }
    }

    /// Builds a mask from equal-length rows.
    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let bits: Vec<bool> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Mask::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Intersection over union. Two empty masks score 1.0.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch { a_w: a.width, a_h: a.height, b_w: b.width, b_h: b.height });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Root mean square of the Euclidean norms of position deltas.
pub fn rmse(deltas: &[Vec3]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ss: f64 = deltas.iter().map(|d| d.dot(*d)).sum();
    Ok((ss / deltas.len() as f64).sqrt())
}

pub fn rmse_scalar(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}

pub fn mae_scalar(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64)
}

/// Mean absolute angle error in degrees; each delta is wrapped into `(-180, 180]` first.
pub fn mae(deltas_deg: &[f64]) -> Result<f64> {
    if deltas_deg.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(deltas_deg.iter().map(|d| wrap_deg(*d).abs()).sum::<f64>() / deltas_deg.len() as f64)
}

/// Signed shortest difference `estimate - truth` in degrees.
pub fn angle_delta_deg(estimate: f64, truth: f64) -> f64 {
    wrap_deg(estimate - truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorUnit {
    #[serde(rename = "mm")]
    Millimeters,
    #[serde(rename = "deg")]
    Degrees,
}

/// `(distance_mm, error)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    values: Vec<(f64, f64)>,
    unit: ErrorUnit,
}

impl ErrorSeries {
    pub fn new(values: Vec<(f64, f64)>, unit: ErrorUnit) -> Result<Self> {
        for (index, &(d, e)) in values.iter().enumerate() {
            if !(d > 0.0) || !d.is_finite() {
                return Err(MetricsError::InvalidSample { index, reason: "distance must be positive and finite" });
            }
            if !e.is_finite() {
                return Err(MetricsError::InvalidSample { index, reason: "error must be finite" });
            }
        }
        Ok(ErrorSeries { values, unit })
    }

    pub fn values(&self) -> &[(f64, f64)] {
        &self.values
    }

    pub fn unit(&self) -> ErrorUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Statistics of one occupied bin. `lower` is inclusive, `upper` exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn bin_values(keys_and_values: impl Iterator<Item = (f64, f64)>, origin: f64, width: f64) -> Vec<BinStat> {
    let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for (k, v) in keys_and_values {
        let idx = ((k - origin) / width).floor() as i64;
        bins.entry(idx).or_default().push(v);
    }
    bins.into_iter()
        .map(|(idx, vals)| {
            let (mean, std) = mean_std(&vals);
            let lower = origin + idx as f64 * width;
            BinStat { lower, upper: lower + width, count: vals.len(), mean, std }
        })
        .collect()
}

/// Groups a series into distance bins of `bin_mm` aligned to multiples of the
/// width. Only occupied bins are returned, in ascending order.
pub fn bin_by_distance(series: &ErrorSeries, bin_mm: f64) -> Result<Vec<BinStat>> {
    if !(bin_mm > 0.0) || !bin_mm.is_finite() {
        return Err(MetricsError::BinWidth(bin_mm));
    }
    if series.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(bin_values(series.values.iter().copied(), 0.0, bin_mm))
}

/// Polar histogram: samples are `(angle_deg, error)`; angles are wrapped into
/// `[-180, 180)` and grouped in bins of `bin_deg` starting at -180.
pub fn angle_histogram(samples: &[(f64, f64)], bin_deg: f64) -> Result<Vec<BinStat>> {
    if !(bin_deg > 0.0) || !bin_deg.is_finite() {
        return Err(MetricsError::BinWidth(bin_deg));
    }
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (index, (a, e)) in samples.iter().enumerate() {
        if !a.is_finite() || !e.is_finite() {
            return Err(MetricsError::InvalidSample { index, reason: "non-finite value" });
        }
    }
    let wrapped = samples.iter().map(|&(a, e)| {
        let w = wrap_deg(a);
        (if w == 180.0 { -180.0 } else { w }, e)
    });
    Ok(bin_values(wrapped, -180.0, bin_deg))
}
