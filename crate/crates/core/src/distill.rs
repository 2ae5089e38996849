//! Teacher-to-student distillation.
//!
//! The teacher's binary probability p is expanded to the distribution
//! [1 - p, p], softened with a temperature F >= 1, and the student's soft
//! head is trained against it; the hard head is trained on the ground-truth
//! labels. The two losses blend as `alpha * hard + (1 - alpha) * F^2 * soft`.
//! Regression distills the teacher's scalar through mean absolute error, in
//! which case the temperature degenerates to 1.

use crate::features::TabularDataset;
use crate::gbdt::GbdtModel;
use crate::mlp::{DistillMlp, DistillTargets, Normalizer, PROB_CLAMP};
use crate::optim::Adam;
use crate::store::TaskKind;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("non-finite input to soften")]
    NonFiniteInput,
    #[error("temperature must be >= 1, got {0}")]
    BadTemperature(f64),
    #[error("alpha must be in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("batch shapes do not match: {0}")]
    ShapeMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Mlp(#[from] crate::mlp::MlpError),
    #[error(transparent)]
    Gbdt(#[from] crate::gbdt::GbdtError),
}

/// A softened teacher target: a two-class distribution or a raw scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftTarget {
    Binary([f64; 2]),
    Scalar(f64),
}

/// Student outputs for a batch, in probability space for classification.
#[derive(Debug, Clone)]
pub enum StudentBatch {
    Binary(Vec<[f64; 2]>),
    Scalar(Vec<f64>),
}

/// Ground-truth labels for a batch.
#[derive(Debug, Clone)]
pub enum HardLabels {
    Binary(Vec<u8>),
    Scalar(Vec<f64>),
}

/// Temperature-softened two-class expansion of a binary teacher probability:
/// softmax([ln(1-p), ln p] / F), with probabilities clamped away from the
/// rails before the log.
pub fn soften(y_tb: f64, temperature: f64) -> Result<SoftTarget, DistillError> {
    if !y_tb.is_finite() {
        return Err(DistillError::NonFiniteInput);
    }
    if !(temperature >= 1.0) {
        return Err(DistillError::BadTemperature(temperature));
    }
    let p = y_tb.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let l0 = (1.0 - p).ln() / temperature;
    let l1 = p.ln() / temperature;
    let m = l0.max(l1);
    let e0 = (l0 - m).exp();
    let e1 = (l1 - m).exp();
    Ok(SoftTarget::Binary([e0 / (e0 + e1), e1 / (e0 + e1)]))
}

/// Ground-truth loss: summed cross-entropy against one-hot labels for
/// classification, mean absolute error for regression.
pub fn hard_loss(preds: &StudentBatch, labels: &HardLabels) -> Result<f64, DistillError> {
    match (preds, labels) {
        (StudentBatch::Binary(p), HardLabels::Binary(y)) => {
            if p.len() != y.len() {
                return Err(DistillError::ShapeMismatch(format!(
                    "{} predictions vs {} labels",
                    p.len(),
                    y.len()
                )));
            }
            Ok(p
                .iter()
                .zip(y)
                .map(|(row, &label)| -row[label as usize].max(PROB_CLAMP).ln())
                .sum())
        }
        (StudentBatch::Scalar(p), HardLabels::Scalar(y)) => {
            if p.len() != y.len() || p.is_empty() {
                return Err(DistillError::ShapeMismatch(format!(
                    "{} predictions vs {} labels",
                    p.len(),
                    y.len()
                )));
            }
            Ok(p.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
        }
        _ => Err(DistillError::ShapeMismatch(
            "mixed scalar and binary batches".into(),
        )),
    }
}

/// Distillation loss: summed cross-entropy between the softened teacher
/// distributions and the student's soft head; mean absolute error against
/// the teacher scalar for regression.
pub fn soft_loss(preds: &StudentBatch, targets: &[SoftTarget]) -> Result<f64, DistillError> {
    match preds {
        StudentBatch::Binary(p) => {
            if p.len() != targets.len() {
                return Err(DistillError::ShapeMismatch(format!(
                    "{} predictions vs {} targets",
                    p.len(),
                    targets.len()
                )));
            }
            let mut total = 0.0;
            for (row, target) in p.iter().zip(targets) {
                let SoftTarget::Binary(t) = target else {
                    return Err(DistillError::ShapeMismatch(
                        "scalar target for binary batch".into(),
                    ));
                };
                total -= t[0] * row[0].max(PROB_CLAMP).ln() + t[1] * row[1].max(PROB_CLAMP).ln();
            }
            Ok(total)
        }
        StudentBatch::Scalar(p) => {
            if p.len() != targets.len() || p.is_empty() {
                return Err(DistillError::ShapeMismatch(format!(
                    "{} predictions vs {} targets",
                    p.len(),
                    targets.len()
                )));
            }
            let mut total = 0.0;
            for (a, target) in p.iter().zip(targets) {
                let SoftTarget::Scalar(t) = target else {
                    return Err(DistillError::ShapeMismatch(
                        "binary target for scalar batch".into(),
                    ));
                };
                total += (a - t).abs();
            }
            Ok(total / p.len() as f64)
        }
    }
}

/// `alpha * hard + (1 - alpha) * temperature^2 * soft`.
pub fn total_loss(hard: f64, soft: f64, alpha: f64, temperature: f64) -> f64 {
    alpha * hard + (1.0 - alpha) * temperature * temperature * soft
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub alpha: f64,
    pub temperature: f64,
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            alpha: 0.5,
            temperature: 2.0,
            learning_rate: 1e-3,
            dropout: 0.1,
            epochs: 200,
            batch_size: 64,
            hidden: vec![64],
            embedding_dim: 10,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<(), DistillError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(DistillError::BadAlpha(self.alpha));
        }
        if !(self.temperature >= 1.0) {
            return Err(DistillError::BadTemperature(self.temperature));
        }
        Ok(())
    }
}

/// Distills the teacher into a fresh two-head MLP by mini-batch Adam on the
/// blended loss. Teacher targets are computed once up front; training is
/// bit-reproducible for a fixed seed.
pub fn train_distill_mlp(
    ds: &TabularDataset,
    teacher: &GbdtModel,
    cfg: &DistillConfig,
) -> Result<DistillMlp, DistillError> {
    cfg.validate()?;
    let n = ds.rows.len();
    if n == 0 {
        return Err(DistillError::EmptyDataset);
    }
    let d = ds.feature_dim();

    // Teacher predictions on raw features, one pass.
    let mut teacher_probs = Vec::with_capacity(n);
    for (f, _) in &ds.rows {
        teacher_probs.push(teacher.predict_values(&f.values)?);
    }
    // Temperature has no analog for the regression MAE; force F = 1 there.
    let temperature = match ds.task_kind {
        TaskKind::BinaryClassification => cfg.temperature,
        TaskKind::Regression => 1.0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mlp = DistillMlp::new(d, &cfg.hidden, cfg.embedding_dim, ds.task_kind, &mut rng);
    mlp.normalizer = Some(Normalizer::fit(
        &ds.rows.iter().map(|(f, _)| f.values.clone()).collect::<Vec<_>>(),
    ));
    let mut adam = Adam::new(cfg.learning_rate, &mlp.param_lengths());
    let batch_size = cfg.batch_size.max(1).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let x = Array2::from_shape_fn((chunk.len(), d), |(i, j)| {
                ds.rows[chunk[i]].0.values[j]
            });
            let targets = match ds.task_kind {
                TaskKind::BinaryClassification => {
                    let labels: Vec<u8> = chunk.iter().map(|&i| ds.rows[i].1 as u8).collect();
                    let teacher: Vec<[f64; 2]> = chunk
                        .iter()
                        .map(|&i| match soften(teacher_probs[i], temperature) {
                            Ok(SoftTarget::Binary(t)) => Ok(t),
                            Ok(SoftTarget::Scalar(_)) => unreachable!(),
                            Err(e) => Err(e),
                        })
                        .collect::<Result<_, _>>()?;
                    DistillTargets::Classification { labels, teacher }
                }
                TaskKind::Regression => DistillTargets::Regression {
                    labels: chunk.iter().map(|&i| ds.rows[i].1).collect(),
                    teacher: chunk.iter().map(|&i| teacher_probs[i]).collect(),
                },
            };
            let dropout = if cfg.dropout > 0.0 {
                Some((cfg.dropout, &mut rng))
            } else {
                None
            };
            let (loss, mut grads) =
                mlp.forward_backward(&x, &targets, cfg.alpha, temperature, dropout)?;
            if !loss.is_finite() {
                return Err(DistillError::Diverged { epoch, loss });
            }
            epoch_loss += loss;
            // Summed classification losses grow with the batch; scale the
            // step so the effective learning rate is batch-size free.
            grads.scale(1.0 / chunk.len() as f64);
            adam.step(&mut mlp.param_slices_mut(), &grads.slices());
        }
        if !epoch_loss.is_finite() {
            return Err(DistillError::Diverged {
                epoch,
                loss: epoch_loss,
            });
        }
    }
    Ok(mlp)
}

/// Penultimate-layer embedding for one engineered feature vector.
pub fn embed(
    mlp: &DistillMlp,
    f: &crate::features::FeatureVector,
) -> Result<Vec<f64>, DistillError> {
    Ok(mlp.embed(&f.values)?)
}
