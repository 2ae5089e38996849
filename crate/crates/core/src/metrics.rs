//! Evaluation metrics: mean absolute error and rank-based ROCAUC.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("rocauc needs both classes present")]
    SingleClass,
    #[error("labels must be 0 or 1, got {0}")]
    BadLabel(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub seed_times: Vec<i64>,
}

/// Mean absolute error.
pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum();
    Ok(sum / preds.len() as f64)
}

/// Area under the ROC curve via the rank statistic: (wins + 0.5 * ties)
/// over all positive-negative pairs, computed from tie-averaged ranks.
pub fn rocauc(scores: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut n_pos = 0usize;
    let mut n_neg = 0usize;
    for &y in labels {
        if y == 1.0 {
            n_pos += 1;
        } else if y == 0.0 {
            n_neg += 1;
        } else {
            return Err(MetricsError::BadLabel(y));
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Tie-averaged ranks (1-based), summed over positives.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1.0 {
                rank_sum_pos += rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}
