//! Evaluation metrics: Spearman and Pearson correlation and the
//! absolute-error histogram.
//!
//! Spearman is the Pearson correlation of average-rank vectors, sharing the
//! tie convention of [`crate::ranking::average_ranks`] so the training
//! reward and the evaluation metric rank identically. Constant input is an
//! explicit error rather than a silent zero: a policy that emits one score
//! everywhere must be visible, not masked.

use serde::{Deserialize, Serialize};

use crate::domain::{LABEL_MAX, LABEL_MIN};
use crate::error::{Error, Result};
use crate::ranking::average_ranks;

/// Counts of absolute prediction errors over the 0..=4 buckets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub counts: [u64; 5],
    pub total: u64,
}

/// Product-moment correlation. Errors on fewer than two observations or on
/// constant input (the correlation is 0/0 there).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), y.len(), "correlation inputs must align");
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "input is constant; correlation is undefined".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Rank correlation: Pearson over average-rank vectors (ties share their
/// mean rank).
pub fn spearman(predicted: &[f64], gold: &[f64]) -> Result<f64> {
    assert_eq!(predicted.len(), gold.len(), "correlation inputs must align");
    if predicted.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 observations, got {}",
            predicted.len()
        )));
    }
    pearson(&average_ranks(predicted), &average_ranks(gold))
}

/// Histogram of |predicted - gold| over integer scores in 1..=5.
pub fn error_histogram(predicted: &[u8], gold: &[u8]) -> ErrorHistogram {
    assert_eq!(predicted.len(), gold.len(), "histogram inputs must align");
    let mut counts = [0u64; 5];
    for (&p, &g) in predicted.iter().zip(gold) {
        assert!(
            (LABEL_MIN..=LABEL_MAX).contains(&p) && (LABEL_MIN..=LABEL_MAX).contains(&g),
            "histogram entries must be scores in {LABEL_MIN}..={LABEL_MAX}"
        );
        counts[(p as i16 - g as i16).unsigned_abs() as usize] += 1;
    }
    ErrorHistogram {
        counts,
        total: predicted.len() as u64,
    }
}
