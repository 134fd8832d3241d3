//! Forecast-quality and attack-impact metrics.
//!
//! `mape` scores forecasts against ground truth, `mpe` scores attacked
//! forecasts against the clean forecasts of the same model (signed, so a
//! min-mode attack reports a negative value). `box_stats` produces the five
//! numbers drawn in a box plot: the box spans q1..q3, the line is the median
//! and the whiskers reach the full data range.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} predictions vs {1} references")]
    LengthMismatch(usize, usize),
    #[error("ground-truth value at index {0} is zero")]
    ZeroTruth(usize),
    #[error("clean forecast at index {0} is zero")]
    ZeroClean(usize),
    #[error("empty input")]
    Empty,
}

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut acc = 0.0;
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        if t == 0.0 {
            return Err(MetricError::ZeroTruth(i));
        }
        acc += (p - t).abs() / t.abs();
    }
    Ok(acc / pred.len() as f64 * 100.0)
}

/// Single-sample signed percentage deviation of an attacked forecast.
pub fn mpe_term(adv: f64, clean: f64) -> Option<f64> {
    if clean == 0.0 {
        None
    } else {
        Some((adv - clean) / clean * 100.0)
    }
}

/// Mean percentage error of attacked forecasts against clean forecasts.
/// Signed: deviations in opposite directions cancel.
pub fn mpe(adv: &[f64], clean: &[f64]) -> Result<f64, MetricError> {
    if adv.len() != clean.len() {
        return Err(MetricError::LengthMismatch(adv.len(), clean.len()));
    }
    if adv.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut acc = 0.0;
    for (i, (&a, &c)) in adv.iter().zip(clean).enumerate() {
        acc += mpe_term(a, c).ok_or(MetricError::ZeroClean(i))?;
    }
    Ok(acc / adv.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Quantile of already-sorted data by linear interpolation between order
/// statistics (h = (n - 1) q).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BoxStats {
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

/// Median of absolute values, the headline robustness number for a set of
/// per-sample MPE terms.
pub fn median_abs(values: &[f64]) -> Result<f64, MetricError> {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    Ok(box_stats(&abs)?.median)
}
