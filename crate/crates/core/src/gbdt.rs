//! Gradient-boosted regression trees: the tabular teacher.
//!
//! Trees are fit by exact greedy split search (no histograms) on first and
//! second-order gradients, with Newton leaf values, l2 regularization, and
//! l1 applied by soft-thresholding. Squared loss drives regression, logistic
//! loss drives binary classification. Growth is leaf-wise up to `num_leaves`
//! under a depth cap. All tie-breaks are fixed (lowest feature index, then
//! lowest threshold, then lowest node id), so retraining with the same seed
//! is bit-identical.

use crate::features::{FeatureVector, TabularDataset};
use crate::store::TaskKind;
use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("model io: {0}")]
    Io(String),
}

/// Training knobs, with ranges matching the search grid the pipeline exposes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub subsample: f64,
    pub colsample: f64,
    pub min_data_in_leaf: usize,
    pub l1: f64,
    pub l2: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_rounds: 60,
            max_depth: 6,
            learning_rate: 0.1,
            num_leaves: 31,
            subsample: 1.0,
            colsample: 1.0,
            min_data_in_leaf: 5,
            l1: 1e-9,
            l2: 0.1,
        }
    }
}

impl GbdtConfig {
    /// Enforces the documented search ranges; training itself accepts any
    /// finite values, this gate is applied to user-supplied configs.
    pub fn validate(&self) -> Result<(), GbdtError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(GbdtError::BadConfig(what.to_string()))
            }
        };
        check(self.n_rounds >= 1, "n_rounds must be >= 1")?;
        check((3..=11).contains(&self.max_depth), "max_depth in [3, 11]")?;
        check(
            (1e-3..=0.1).contains(&self.learning_rate),
            "learning_rate in [1e-3, 0.1]",
        )?;
        check((2..=1024).contains(&self.num_leaves), "num_leaves in [2, 1024]")?;
        check((0.05..=1.0).contains(&self.subsample), "subsample in [0.05, 1.0]")?;
        check((0.05..=1.0).contains(&self.colsample), "colsample in [0.05, 1.0]")?;
        check(
            (1..=100).contains(&self.min_data_in_leaf),
            "min_data_in_leaf in [1, 100]",
        )?;
        check((1e-9..=10.0).contains(&self.l1), "l1 in [1e-9, 10]")?;
        check((1e-9..=10.0).contains(&self.l2), "l2 in [1e-9, 10]")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
    pub is_leaf: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            if node.is_leaf {
                return node.value;
            }
            i = if x[node.feature] < node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            if nodes[i].is_leaf {
                0
            } else {
                1 + walk(nodes, nodes[i].left).max(walk(nodes, nodes[i].right))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }
}

/// Trained ensemble. Classification output passes through a sigmoid with the
/// raw sum clamped to +-30, so probabilities are strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub task_kind: TaskKind,
    pub feature_dim: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Set when the training labels carried no signal (single class or zero
    /// variance); the model is the base score alone.
    pub degenerate: bool,
}

const RAW_CLAMP: f64 = 30.0;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl GbdtModel {
    /// Raw additive score: base plus learning-rate-scaled leaf values.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, GbdtError> {
        if x.len() != self.feature_dim {
            return Err(GbdtError::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        let mut raw = self.base_score;
        for tree in &self.trees {
            raw += self.learning_rate * tree.leaf_value(x);
        }
        Ok(raw)
    }

    /// Task-space prediction: raw sum for regression, sigmoid of the clamped
    /// raw sum for classification.
    pub fn predict_values(&self, x: &[f64]) -> Result<f64, GbdtError> {
        let raw = self.predict_raw(x)?;
        Ok(match self.task_kind {
            TaskKind::Regression => raw,
            TaskKind::BinaryClassification => sigmoid(raw.clamp(-RAW_CLAMP, RAW_CLAMP)),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GbdtError> {
        serde_json::from_str(text).map_err(|e| GbdtError::Io(e.to_string()))
    }
}

/// Prediction on an engineered feature vector.
pub fn gbdt_predict(model: &GbdtModel, f: &FeatureVector) -> Result<f64, GbdtError> {
    model.predict_values(&f.values)
}

// l1 soft-threshold of the gradient sum.
fn shrink(g: f64, l1: f64) -> f64 {
    if g > l1 {
        g - l1
    } else if g < -l1 {
        g + l1
    } else {
        0.0
    }
}

fn leaf_score(g: f64, h: f64, l1: f64, l2: f64) -> f64 {
    let t = shrink(g, l1);
    t * t / (h + l2)
}

fn leaf_weight(g: f64, h: f64, l1: f64, l2: f64) -> f64 {
    -shrink(g, l1) / (h + l2)
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct GrowingLeaf {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    best: Option<SplitCandidate>,
}

/// Best split for one leaf. Candidates are scanned feature-ascending and
/// threshold-ascending with a strict improvement test, so equal gains keep
/// the lowest feature index and lowest threshold.
fn best_split(
    columns: &[Vec<f64>],
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    cfg: &GbdtConfig,
) -> Option<SplitCandidate> {
    let g_total: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let h_total: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
    let parent = leaf_score(g_total, h_total, cfg.l1, cfg.l2);

    let mut best: Option<SplitCandidate> = None;
    let mut scratch: Vec<(f64, u32)> = Vec::with_capacity(rows.len());
    for &f in features {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (columns[f][r as usize], r)));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for i in 0..scratch.len() - 1 {
            let r = scratch[i].1 as usize;
            g_left += grad[r];
            h_left += hess[r];
            let (v, v_next) = (scratch[i].0, scratch[i + 1].0);
            if v == v_next {
                continue;
            }
            let n_left = i + 1;
            let n_right = scratch.len() - n_left;
            if n_left < cfg.min_data_in_leaf || n_right < cfg.min_data_in_leaf {
                continue;
            }
            let g_right = g_total - g_left;
            let h_right = h_total - h_left;
            let gain = 0.5
                * (leaf_score(g_left, h_left, cfg.l1, cfg.l2)
                    + leaf_score(g_right, h_right, cfg.l1, cfg.l2)
                    - parent);
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    gain,
                    feature: f,
                    threshold: v.midpoint(v_next),
                });
            }
        }
    }
    best
}

fn build_tree(
    columns: &[Vec<f64>],
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    cfg: &GbdtConfig,
) -> Tree {
    let mut nodes = vec![TreeNode {
        feature: 0,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: 0.0,
        is_leaf: true,
    }];
    let root_best = if rows.len() >= 2 * cfg.min_data_in_leaf && cfg.max_depth > 0 {
        best_split(columns, &rows, grad, hess, features, cfg)
    } else {
        None
    };
    let mut leaves = vec![GrowingLeaf {
        node: 0,
        depth: 0,
        rows,
        best: root_best,
    }];
    let mut n_leaves = 1;

    while n_leaves < cfg.num_leaves {
        // Highest-gain splittable leaf; ties resolve to the lowest node id
        // because iteration order is node-creation order.
        let mut pick: Option<(usize, f64)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(c) = &leaf.best {
                if pick.is_none_or(|(_, g)| c.gain > g) {
                    pick = Some((i, c.gain));
                }
            }
        }
        let Some((leaf_idx, _)) = pick else { break };

        let leaf = leaves.swap_remove(leaf_idx);
        let cand = leaf.best.expect("picked leaf has a candidate");
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &r in &leaf.rows {
            if columns[cand.feature][r as usize] < cand.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        let left_id = nodes.len();
        let right_id = nodes.len() + 1;
        nodes.push(TreeNode {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: 0.0,
            is_leaf: true,
        });
        nodes.push(TreeNode {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: 0.0,
            is_leaf: true,
        });
        let parent = &mut nodes[leaf.node];
        parent.is_leaf = false;
        parent.feature = cand.feature;
        parent.threshold = cand.threshold;
        parent.left = left_id;
        parent.right = right_id;

        let child_depth = leaf.depth + 1;
        for (node, rows) in [(left_id, left_rows), (right_id, right_rows)] {
            let best = if child_depth < cfg.max_depth && rows.len() >= 2 * cfg.min_data_in_leaf {
                best_split(columns, &rows, grad, hess, features, cfg)
            } else {
                None
            };
            leaves.push(GrowingLeaf {
                node,
                depth: child_depth,
                rows,
                best,
            });
        }
        n_leaves += 1;
    }

    for leaf in leaves {
        let g: f64 = leaf.rows.iter().map(|&r| grad[r as usize]).sum();
        let h: f64 = leaf.rows.iter().map(|&r| hess[r as usize]).sum();
        nodes[leaf.node].value = leaf_weight(g, h, cfg.l1, cfg.l2);
    }
    Tree { nodes }
}

/// Fits `cfg.n_rounds` trees on the dataset. Deterministic given the seed:
/// row and feature subsampling are the only random choices and the sampled
/// index sets are sorted before use.
pub fn train_gbdt(
    ds: &TabularDataset,
    cfg: &GbdtConfig,
    seed: u64,
) -> Result<GbdtModel, GbdtError> {
    let n = ds.rows.len();
    if n == 0 {
        return Err(GbdtError::EmptyDataset);
    }
    let d = ds.feature_dim();
    if d == 0 {
        return Err(GbdtError::BadConfig("feature dimension must be >= 1".into()));
    }

    // Column-major copy for the scan-based split search.
    let mut columns = vec![vec![0.0; n]; d];
    let mut labels = Vec::with_capacity(n);
    for (i, (f, y)) in ds.rows.iter().enumerate() {
        if f.values.len() != d {
            return Err(GbdtError::DimensionMismatch {
                expected: d,
                got: f.values.len(),
            });
        }
        for (j, v) in f.values.iter().enumerate() {
            columns[j][i] = *v;
        }
        labels.push(*y);
    }

    let mean_label = labels.iter().sum::<f64>() / n as f64;
    let degenerate = labels.iter().all(|&y| y == labels[0]);
    let base_score = match ds.task_kind {
        TaskKind::Regression => mean_label,
        TaskKind::BinaryClassification => {
            let p = mean_label.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };
    let mut model = GbdtModel {
        task_kind: ds.task_kind,
        feature_dim: d,
        base_score,
        learning_rate: cfg.learning_rate,
        trees: Vec::new(),
        degenerate,
    };
    if degenerate {
        return Ok(model);
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut raw = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..cfg.n_rounds {
        for i in 0..n {
            match ds.task_kind {
                TaskKind::Regression => {
                    grad[i] = raw[i] - labels[i];
                    hess[i] = 1.0;
                }
                TaskKind::BinaryClassification => {
                    let p = sigmoid(raw[i]);
                    grad[i] = p - labels[i];
                    hess[i] = (p * (1.0 - p)).max(1e-16);
                }
            }
        }

        let rows: Vec<u32> = if cfg.subsample < 1.0 {
            let k = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
            let mut picked: Vec<u32> = sample(&mut rng, n, k).iter().map(|i| i as u32).collect();
            picked.sort_unstable();
            picked
        } else {
            (0..n as u32).collect()
        };
        let features: Vec<usize> = if cfg.colsample < 1.0 {
            let k = ((cfg.colsample * d as f64).round() as usize).clamp(1, d);
            let mut picked: Vec<usize> = sample(&mut rng, d, k).iter().collect();
            picked.sort_unstable();
            picked
        } else {
            (0..d).collect()
        };

        let tree = build_tree(&columns, rows, &grad, &hess, &features, cfg);
        for i in 0..n {
            let x: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            raw[i] += cfg.learning_rate * tree.leaf_value(&x);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use rand::Rng;

    fn dataset(xs: &[Vec<f64>], ys: &[f64], task_kind: TaskKind) -> TabularDataset {
        TabularDataset {
            rows: xs
                .iter()
                .zip(ys)
                .map(|(x, &y)| {
                    (
                        FeatureVector {
                            values: x.clone(),
                            entity: (0, 1),
                            seed_time: 0,
                        },
                        y,
                    )
                })
                .collect(),
            task_kind,
        }
    }

    fn stump(task_kind: TaskKind) -> GbdtModel {
        GbdtModel {
            task_kind,
            feature_dim: 2,
            base_score: 0.0,
            learning_rate: 1.0,
            trees: vec![Tree {
                nodes: vec![
                    TreeNode {
                        feature: 0,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                        value: 0.0,
                        is_leaf: false,
                    },
                    TreeNode {
                        feature: 0,
                        threshold: 0.0,
                        left: 0,
                        right: 0,
                        value: -1.0,
                        is_leaf: true,
                    },
                    TreeNode {
                        feature: 0,
                        threshold: 0.0,
                        left: 0,
                        right: 0,
                        value: 1.0,
                        is_leaf: true,
                    },
                ],
            }],
            degenerate: false,
        }
    }

    #[test]
    fn empty_tree_list_returns_base_score() {
        let model = GbdtModel {
            task_kind: TaskKind::Regression,
            feature_dim: 1,
            base_score: 2.5,
            learning_rate: 0.1,
            trees: vec![],
            degenerate: false,
        };
        assert_eq!(model.predict_values(&[7.0]).unwrap(), 2.5);
        let cls = GbdtModel {
            task_kind: TaskKind::BinaryClassification,
            ..model
        };
        assert!((cls.predict_values(&[7.0]).unwrap() - sigmoid(2.5)).abs() < 1e-15);
    }

    #[test]
    fn stump_is_piecewise_on_the_split_feature() {
        let m = stump(TaskKind::Regression);
        assert_eq!(m.predict_values(&[0.0, 9.9]).unwrap(), -1.0);
        assert_eq!(m.predict_values(&[1.0, -3.0]).unwrap(), 1.0);
    }

    #[test]
    fn prediction_ignores_features_the_trees_never_split_on() {
        let m = stump(TaskKind::Regression);
        let a = m.predict_values(&[0.2, -100.0]).unwrap();
        let b = m.predict_values(&[0.2, 100.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = stump(TaskKind::Regression);
        assert!(matches!(
            m.predict_values(&[1.0]),
            Err(GbdtError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn constant_labels_yield_flagged_base_only_model() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ys = vec![3.25; 10];
        let model = train_gbdt(&dataset(&xs, &ys, TaskKind::Regression), &GbdtConfig::default(), 0)
            .unwrap();
        assert!(model.degenerate);
        assert!(model.trees.is_empty());
        for x in &xs {
            assert_eq!(model.predict_values(x).unwrap(), 3.25);
        }

        let ones = vec![1.0; 10];
        let cls = train_gbdt(
            &dataset(&xs, &ones, TaskKind::BinaryClassification),
            &GbdtConfig::default(),
            0,
        )
        .unwrap();
        assert!(cls.degenerate);
        for x in &xs {
            assert!((cls.predict_values(x).unwrap() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_predictions_at_base() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let ys: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let cfg = GbdtConfig {
            learning_rate: 0.0,
            n_rounds: 5,
            ..GbdtConfig::default()
        };
        let model = train_gbdt(&dataset(&xs, &ys, TaskKind::Regression), &cfg, 0).unwrap();
        let base = model.base_score;
        for x in &xs {
            assert_eq!(model.predict_values(x).unwrap(), base);
        }
    }

    #[test]
    fn xor_is_learned_with_row_subsampling() {
        // Pure greedy search on the full 4-point set is stuck at zero gain by
        // symmetry; subsampling breaks it and boosting finishes the job.
        let xs = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let ys = vec![0.0, 1.0, 1.0, 0.0];
        let cfg = GbdtConfig {
            n_rounds: 400,
            max_depth: 3,
            num_leaves: 4,
            learning_rate: 0.1,
            subsample: 0.75,
            colsample: 1.0,
            min_data_in_leaf: 1,
            l1: 1e-9,
            l2: 1e-6,
        };
        let model =
            train_gbdt(&dataset(&xs, &ys, TaskKind::BinaryClassification), &cfg, 7).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let p = model.predict_values(x).unwrap();
            assert_eq!(f64::from(p > 0.5), *y, "x={x:?} p={p}");
        }
    }

    #[test]
    fn classification_outputs_stay_strictly_inside_unit_interval() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = (0..40).map(|i| f64::from(i >= 20)).collect();
        let cfg = GbdtConfig {
            n_rounds: 200,
            l2: 1e-6,
            min_data_in_leaf: 1,
            ..GbdtConfig::default()
        };
        let model =
            train_gbdt(&dataset(&xs, &ys, TaskKind::BinaryClassification), &cfg, 0).unwrap();
        for x in &xs {
            let p = model.predict_values(x).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn split_tie_breaks_pick_lowest_feature_then_lowest_threshold() {
        // Feature 1 duplicates feature 0, so every split gain ties; the tree
        // must split on feature 0.
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let ys: Vec<f64> = (0..8).map(|i| f64::from(i >= 4)).collect();
        let cfg = GbdtConfig {
            n_rounds: 1,
            min_data_in_leaf: 1,
            ..GbdtConfig::default()
        };
        let model = train_gbdt(&dataset(&xs, &ys, TaskKind::Regression), &cfg, 0).unwrap();
        let root = &model.trees[0].nodes[0];
        assert!(!root.is_leaf);
        assert_eq!(root.feature, 0);
        assert_eq!(root.threshold, 3.5);
    }

    #[test]
    fn retraining_with_same_seed_is_bit_identical() {
        let mut rng = StdRng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * 1.5 - x[2]).collect();
        let cfg = GbdtConfig {
            subsample: 0.7,
            colsample: 0.8,
            ..GbdtConfig::default()
        };
        let ds = dataset(&xs, &ys, TaskKind::Regression);
        let a = train_gbdt(&ds, &cfg, 123).unwrap();
        let b = train_gbdt(&ds, &cfg, 123).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn serialization_round_trips_predictions() {
        let mut rng = StdRng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] + x[1] * x[1]).tanh()).collect();
        let model =
            train_gbdt(&dataset(&xs, &ys, TaskKind::Regression), &GbdtConfig::default(), 4)
                .unwrap();
        let restored = GbdtModel::from_json(&model.to_json()).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-6.0..6.0)).collect();
            assert_eq!(
                model.predict_values(&x).unwrap(),
                restored.predict_values(&x).unwrap()
            );
        }
    }

    #[test]
    fn regression_mse_is_non_increasing_with_exact_leaf_means() {
        // Exact leaf means = squared loss with no regularization; each round
        // can only shrink the training MSE when the learning rate is in
        // (0, 1].
        let mut rng = StdRng::seed_from_u64(77);
        for trial in 0..50 {
            let n = rng.random_range(10..60);
            let d = rng.random_range(1..4);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lr = rng.random_range(0.05..=1.0);
            let cfg = GbdtConfig {
                n_rounds: 12,
                learning_rate: lr,
                l1: 0.0,
                l2: 0.0,
                min_data_in_leaf: 1,
                subsample: 1.0,
                colsample: 1.0,
                ..GbdtConfig::default()
            };
            let ds = dataset(&xs, &ys, TaskKind::Regression);
            let model = train_gbdt(&ds, &cfg, trial).unwrap();

            let mut raw: Vec<f64> = vec![model.base_score; n];
            let mut prev_mse = f64::INFINITY;
            for round in 0..=model.trees.len() {
                if round > 0 {
                    let tree = &model.trees[round - 1];
                    for (i, x) in xs.iter().enumerate() {
                        raw[i] += lr * tree.leaf_value(x);
                    }
                }
                let mse: f64 = raw
                    .iter()
                    .zip(&ys)
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum::<f64>()
                    / n as f64;
                assert!(
                    mse <= prev_mse + 1e-9,
                    "trial {trial} round {round}: {mse} > {prev_mse}"
                );
                prev_mse = mse;
            }
        }
    }

    #[test]
    fn config_ranges_are_enforced() {
        assert!(GbdtConfig::default().validate().is_ok());
        let bad = GbdtConfig {
            max_depth: 2,
            ..GbdtConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GbdtConfig {
            learning_rate: 0.5,
            ..GbdtConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
