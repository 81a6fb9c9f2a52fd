//! Prediction accuracy within a tolerance, plus MAE/RMSE.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Default hit tolerance in seconds.
pub const DEFAULT_TOLERANCE_SEC: f64 = 10.0;

/// Fraction of predictions within `tolerance` of their label (inclusive).
pub fn accuracy_pdt(predictions: &[f64], labels: &[f64], tolerance: f64) -> Result<f64> {
    check_pair(predictions, labels)?;
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| is_hit(**p, **l, tolerance))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

pub fn mae(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(predictions, labels)?;
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l).abs())
        .sum();
    Ok(sum / predictions.len() as f64)
}

pub fn rmse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(predictions, labels)?;
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

fn is_hit(prediction: f64, label: f64, tolerance: f64) -> bool {
    (prediction - label).abs() <= tolerance
}

fn check_pair(predictions: &[f64], labels: &[f64]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if let Some(v) = predictions.iter().chain(labels).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{v} in predictions or labels")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub row_index: usize,
    pub label_sec: f64,
    pub prediction_sec: f64,
    pub abs_error_sec: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub accuracy_pdt: f64,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
    pub samples: Vec<Sample>,
}

/// Scores predictions in seconds. `row_indices` label each sample in the
/// per-sample output.
pub fn evaluate(
    predictions: &[f64],
    labels: &[f64],
    row_indices: &[usize],
    tolerance: f64,
) -> Result<EvaluationResult> {
    check_pair(predictions, labels)?;
    if row_indices.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: row_indices.len(),
            right: labels.len(),
        });
    }
    let samples = predictions
        .iter()
        .zip(labels)
        .zip(row_indices)
        .map(|((&p, &l), &row_index)| Sample {
            row_index,
            label_sec: l,
            prediction_sec: p,
            abs_error_sec: (p - l).abs(),
            hit: is_hit(p, l, tolerance),
        })
        .collect();
    Ok(EvaluationResult {
        accuracy_pdt: accuracy_pdt(predictions, labels, tolerance)?,
        mae: mae(predictions, labels)?,
        rmse: rmse(predictions, labels)?,
        n: predictions.len(),
        samples,
    })
}

pub const SAMPLE_CSV_HEADER: &str = "set,row_index,label_sec,prediction_sec,abs_error_sec,hit";

impl EvaluationResult {
    /// Per-sample CSV lines tagged with `set`, without the header.
    pub fn csv_rows(&self, set: &str) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{set},{},{},{},{},{}",
                s.row_index, s.label_sec, s.prediction_sec, s.abs_error_sec, s.hit
            );
        }
        out
    }
}
