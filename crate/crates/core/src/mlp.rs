//! The two-head student MLP and its reverse-mode gradients.
//!
//! A shared ReLU trunk ends in the embedding layer; two affine heads sit on
//! top of it. The hard head learns the ground-truth labels and the soft head
//! learns the teacher's (softened) outputs, so the post-activation output of
//! the last trunk layer is the temporal embedding both heads consume.
//! Backward passes are written out explicitly and checked against central
//! finite differences in the tests.

use crate::store::TaskKind;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input width {got} does not match trunk input {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {0} encountered")]
    NonFinite(&'static str),
    #[error("model io: {0}")]
    Io(String),
}

/// Affine map y = x W^T + b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseLayer {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn seeded(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        // He-style scale for the ReLU trunk.
        let std = (2.0 / in_dim.max(1) as f64).sqrt();
        let weight =
            Array2::from_shape_fn((out_dim, in_dim), |_| standard_normal(rng) * std);
        DenseLayer {
            weight,
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the dependency surface small and the draw order fixed.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Z-score parameters captured on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(1e-12)).collect();
        Normalizer { mean, std }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[i]) / self.std[i];
            }
        }
        out
    }
}

/// Distillation targets for one batch, teacher outputs already prepared.
#[derive(Debug, Clone)]
pub enum DistillTargets {
    Classification {
        labels: Vec<u8>,
        /// Temperature-softened teacher distributions, one per row.
        teacher: Vec<[f64; 2]>,
    },
    Regression {
        labels: Vec<f64>,
        teacher: Vec<f64>,
    },
}

impl DistillTargets {
    pub fn len(&self) -> usize {
        match self {
            DistillTargets::Classification { labels, .. } => labels.len(),
            DistillTargets::Regression { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gradients mirroring the parameter layout of [`DistillMlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub trunk: Vec<(Array2<f64>, Array1<f64>)>,
    pub head_hard: (Array2<f64>, Array1<f64>),
    pub head_soft: (Array2<f64>, Array1<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillMlp {
    pub normalizer: Option<Normalizer>,
    pub trunk: Vec<DenseLayer>,
    pub head_hard: DenseLayer,
    pub head_soft: DenseLayer,
    pub task_kind: TaskKind,
}

/// Probability floor before logs, shared with the loss functions.
pub const PROB_CLAMP: f64 = 1e-12;

pub(crate) fn softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let m = z0.max(z1);
    let e0 = (z0 - m).exp();
    let e1 = (z1 - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

impl DistillMlp {
    /// Fresh seeded network: trunk widths `hidden` plus a final embedding
    /// layer of width `embedding_dim`, heads sized for the task.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        embedding_dim: usize,
        task_kind: TaskKind,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(embedding_dim);
        let trunk = dims
            .windows(2)
            .map(|w| DenseLayer::seeded(w[1], w[0], rng))
            .collect();
        let out_dim = match task_kind {
            TaskKind::BinaryClassification => 2,
            TaskKind::Regression => 1,
        };
        DistillMlp {
            normalizer: None,
            trunk,
            head_hard: DenseLayer::seeded(out_dim, embedding_dim, rng),
            head_soft: DenseLayer::seeded(out_dim, embedding_dim, rng),
            task_kind,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn embedding_dim(&self) -> usize {
        self.trunk.last().map_or(0, DenseLayer::out_dim)
    }

    fn check_input(&self, width: usize) -> Result<(), MlpError> {
        if width != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                got: width,
            });
        }
        Ok(())
    }

    /// Trunk forward with ReLU after every layer; dropout masks (inverted
    /// scaling) are applied to the activations only when supplied.
    fn trunk_forward(
        &self,
        x: &Array2<f64>,
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> TrunkCache {
        let input = match &self.normalizer {
            Some(nz) => nz.apply(x),
            None => x.clone(),
        };
        let mut activations = Vec::with_capacity(self.trunk.len());
        let mut masks: Vec<Option<Array2<f64>>> = Vec::with_capacity(self.trunk.len());
        let mut current = input.clone();
        let mut dropout = dropout;
        for layer in &self.trunk {
            let z = layer.forward(&current);
            let mut a = z.mapv(|v| v.max(0.0));
            let mask = match &mut dropout {
                Some((p, rng)) if *p > 0.0 => {
                    let keep = 1.0 - *p;
                    let m = Array2::from_shape_fn(a.raw_dim(), |_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            activations.push(a.clone());
            masks.push(mask);
            current = a;
        }
        TrunkCache {
            input,
            activations,
            masks,
        }
    }

    /// Penultimate-layer output for one feature vector: the temporal
    /// embedding. Dropout is never applied here.
    pub fn embed(&self, values: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(values.len())?;
        let x = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("shape");
        let cache = self.trunk_forward(&x, None);
        let emb = cache.activations.last().expect("trunk is non-empty");
        Ok(emb.row(0).to_vec())
    }

    /// Hard-head output in task space: class-1 probability or scalar.
    pub fn predict(&self, values: &[f64]) -> Result<f64, MlpError> {
        self.check_input(values.len())?;
        let x = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("shape");
        let cache = self.trunk_forward(&x, None);
        let emb = cache.activations.last().expect("trunk is non-empty");
        let z = self.head_hard.forward(emb);
        Ok(match self.task_kind {
            TaskKind::BinaryClassification => softmax2(z[[0, 0]], z[[0, 1]])[1],
            TaskKind::Regression => z[[0, 0]],
        })
    }

    /// Hard- and soft-head outputs for a batch, in task space (class-1
    /// probability for classification).
    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>), MlpError> {
        self.check_input(x.ncols())?;
        let cache = self.trunk_forward(x, None);
        let emb = cache.activations.last().expect("trunk is non-empty");
        let zh = self.head_hard.forward(emb);
        let zs = self.head_soft.forward(emb);
        let project = |z: &Array2<f64>| -> Vec<f64> {
            match self.task_kind {
                TaskKind::BinaryClassification => (0..z.nrows())
                    .map(|i| softmax2(z[[i, 0]], z[[i, 1]])[1])
                    .collect(),
                TaskKind::Regression => z.column(0).to_vec(),
            }
        };
        Ok((project(&zh), project(&zs)))
    }

    /// Loss and exact parameter gradients for one batch.
    ///
    /// Classification losses are summed over rows (hard: cross-entropy
    /// against one-hot labels; soft: cross-entropy against the softened
    /// teacher); regression losses are mean absolute errors. The blend is
    /// `alpha * hard + (1 - alpha) * temperature^2 * soft`.
    pub fn forward_backward(
        &self,
        x: &Array2<f64>,
        targets: &DistillTargets,
        alpha: f64,
        temperature: f64,
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<(f64, MlpGrads), MlpError> {
        self.check_input(x.ncols())?;
        let n = x.nrows();
        assert_eq!(n, targets.len(), "batch/target size mismatch");
        let cache = self.trunk_forward(x, dropout);
        let emb = cache.activations.last().expect("trunk is non-empty");
        let zh = self.head_hard.forward(emb);
        let zs = self.head_soft.forward(emb);

        let soft_scale = (1.0 - alpha) * temperature * temperature;
        let mut d_zh = Array2::zeros(zh.raw_dim());
        let mut d_zs = Array2::zeros(zs.raw_dim());
        let mut hard_sum = 0.0;
        let mut soft_sum = 0.0;
        match targets {
            DistillTargets::Classification { labels, teacher } => {
                for i in 0..n {
                    let ph = softmax2(zh[[i, 0]], zh[[i, 1]]);
                    let ps = softmax2(zs[[i, 0]], zs[[i, 1]]);
                    let y = labels[i] as usize;
                    hard_sum -= ph[y].max(PROB_CLAMP).ln();
                    soft_sum -= teacher[i][0] * ps[0].max(PROB_CLAMP).ln()
                        + teacher[i][1] * ps[1].max(PROB_CLAMP).ln();
                    for c in 0..2 {
                        let one_hot = f64::from(c == y);
                        d_zh[[i, c]] = alpha * (ph[c] - one_hot);
                        d_zs[[i, c]] = soft_scale * (ps[c] - teacher[i][c]);
                    }
                }
            }
            DistillTargets::Regression { labels, teacher } => {
                let inv_n = 1.0 / n as f64;
                for i in 0..n {
                    let rh = zh[[i, 0]] - labels[i];
                    let rs = zs[[i, 0]] - teacher[i];
                    hard_sum += rh.abs() * inv_n;
                    soft_sum += rs.abs() * inv_n;
                    d_zh[[i, 0]] = alpha * rh.signum() * inv_n;
                    d_zs[[i, 0]] = soft_scale * rs.signum() * inv_n;
                }
            }
        }
        let total = alpha * hard_sum + soft_scale * soft_sum;
        if !total.is_finite() {
            return Err(MlpError::NonFinite("loss"));
        }

        // Heads.
        let head_hard = (d_zh.t().dot(emb), d_zh.sum_axis(Axis(0)));
        let head_soft = (d_zs.t().dot(emb), d_zs.sum_axis(Axis(0)));
        let mut d_act = d_zh.dot(&self.head_hard.weight) + d_zs.dot(&self.head_soft.weight);

        // Trunk, reversed.
        let mut trunk_grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(self.trunk.len());
        for (l, layer) in self.trunk.iter().enumerate().rev() {
            let a = &cache.activations[l];
            if let Some(mask) = &cache.masks[l] {
                d_act *= mask;
            }
            // ReLU gate: the stored activation is positive iff the
            // pre-activation was (masks only zero or scale it).
            let mut d_z = d_act;
            d_z.zip_mut_with(a, |g, &av| {
                if av <= 0.0 {
                    *g = 0.0;
                }
            });
            let below: &Array2<f64> = if l == 0 {
                &cache.input
            } else {
                &cache.activations[l - 1]
            };
            trunk_grads.push((d_z.t().dot(below), d_z.sum_axis(Axis(0))));
            d_act = d_z.dot(&layer.weight);
        }
        trunk_grads.reverse();

        Ok((
            total,
            MlpGrads {
                trunk: trunk_grads,
                head_hard,
                head_soft,
            },
        ))
    }

    /// Flattened views over every parameter tensor, trunk first then heads;
    /// the order matches [`MlpGrads`] and is what the optimizer sees.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.trunk {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_hard.weight.as_slice_mut().expect("standard layout"));
        out.push(self.head_hard.bias.as_slice_mut().expect("standard layout"));
        out.push(self.head_soft.weight.as_slice_mut().expect("standard layout"));
        out.push(self.head_soft.bias.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn param_lengths(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.trunk {
            out.push(layer.weight.len());
            out.push(layer.bias.len());
        }
        out.push(self.head_hard.weight.len());
        out.push(self.head_hard.bias.len());
        out.push(self.head_soft.weight.len());
        out.push(self.head_soft.bias.len());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        serde_json::from_str(text).map_err(|e| MlpError::Io(e.to_string()))
    }
}

impl MlpGrads {
    /// Flattened views in the same order as
    /// [`DistillMlp::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (w, b) in &self.trunk {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out.push(self.head_hard.0.as_slice().expect("standard layout"));
        out.push(self.head_hard.1.as_slice().expect("standard layout"));
        out.push(self.head_soft.0.as_slice().expect("standard layout"));
        out.push(self.head_soft.1.as_slice().expect("standard layout"));
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.trunk {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
        for (w, b) in [&mut self.head_hard, &mut self.head_soft] {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }
}

struct TrunkCache {
    input: Array2<f64>,
    activations: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}
