//! Gradient boosting with exact greedy regression trees.
//!
//! Squared-error boosting: each round fits a depth-limited tree to the
//! current residuals by exhaustive split search (every feature, every
//! midpoint between adjacent distinct values), then steps the ensemble by
//! `learning_rate` times the leaf means. Split gains accumulate into
//! per-feature importance. Ties between equal-gain splits resolve to the
//! lowest feature index then lowest threshold, so fits are deterministic.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{GbtConfig, ModelError, TrainingLog};

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Split feature, or `u32::MAX` for a leaf.
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Leaf prediction (mean residual); unused on split nodes.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.feature == LEAF {
                return node.value;
            }
            idx = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Total split gain per feature.
    pub importance: Vec<f64>,
}

impl GbtModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.init
            + self.learning_rate
                * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: u32,
    threshold: f64,
}

struct NodeScan {
    sum: f64,
    count: usize,
    sum_left: f64,
    count_left: usize,
    last_val: f64,
    seen: bool,
    best: Option<Candidate>,
}

pub(super) fn fit(
    x: &Array2<f64>,
    y: &[f64],
    cfg: &GbtConfig,
    log: &mut TrainingLog,
) -> Result<GbtModel, ModelError> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let columns: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).to_vec()).collect();
    let sorted_idx: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                col[a as usize]
                    .partial_cmp(&col[b as usize])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let init = y.iter().sum::<f64>() / n as f64;
    let mut preds = vec![init; n];
    let mut residual: Vec<f64> = y.iter().zip(&preds).map(|(a, b)| a - b).collect();
    let mut importance = vec![0.0; p];
    let mut trees = Vec::with_capacity(cfg.trees);

    for _ in 0..cfg.trees {
        let (tree, leaf_of_sample) =
            grow_tree(&columns, &sorted_idx, &residual, cfg, &mut importance);
        for i in 0..n {
            preds[i] += cfg.learning_rate * tree.nodes[leaf_of_sample[i] as usize].value;
            residual[i] = y[i] - preds[i];
        }
        let mse = residual.iter().map(|r| r * r).sum::<f64>() / n as f64;
        log.train_loss.push(mse);
        trees.push(tree);
    }
    log.epochs_run = trees.len();

    Ok(GbtModel {
        init,
        learning_rate: cfg.learning_rate,
        trees,
        importance,
    })
}

/// Grow one tree level by level; returns the tree and each sample's leaf.
fn grow_tree(
    columns: &[Vec<f64>],
    sorted_idx: &[Vec<u32>],
    residual: &[f64],
    cfg: &GbtConfig,
    importance: &mut [f64],
) -> (Tree, Vec<u32>) {
    let n = residual.len();
    let total_sum: f64 = residual.iter().sum();
    let mut nodes = vec![TreeNode {
        feature: LEAF,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: total_sum / n as f64,
    }];
    let mut node_of_sample = vec![0u32; n];
    let mut level: Vec<u32> = vec![0];
    let mut node_stats: Vec<(f64, usize)> = vec![(total_sum, n)];

    for _ in 0..cfg.max_depth {
        if level.is_empty() {
            break;
        }
        // level_slot[node] = dense index into the per-level scan state.
        let mut level_slot = vec![usize::MAX; nodes.len()];
        let mut scans: Vec<NodeScan> = Vec::with_capacity(level.len());
        for (slot, &node) in level.iter().enumerate() {
            level_slot[node as usize] = slot;
            let (sum, count) = node_stats[node as usize];
            scans.push(NodeScan {
                sum,
                count,
                sum_left: 0.0,
                count_left: 0,
                last_val: f64::NAN,
                seen: false,
                best: None,
            });
        }

        for (j, order) in sorted_idx.iter().enumerate() {
            for s in scans.iter_mut() {
                s.sum_left = 0.0;
                s.count_left = 0;
                s.seen = false;
            }
            let col = &columns[j];
            for &i in order {
                let node = node_of_sample[i as usize] as usize;
                let slot = level_slot[node];
                if slot == usize::MAX {
                    continue;
                }
                let s = &mut scans[slot];
                let v = col[i as usize];
                if s.seen && v > s.last_val {
                    let count_right = s.count - s.count_left;
                    if s.count_left >= cfg.min_leaf && count_right >= cfg.min_leaf {
                        let sum_right = s.sum - s.sum_left;
                        let gain = s.sum_left * s.sum_left / s.count_left as f64
                            + sum_right * sum_right / count_right as f64
                            - s.sum * s.sum / s.count as f64;
                        let better = match s.best {
                            None => gain > 0.0,
                            Some(b) => gain > b.gain,
                        };
                        if better {
                            s.best = Some(Candidate {
                                gain,
                                feature: j as u32,
                                threshold: (s.last_val + v) / 2.0,
                            });
                        }
                    }
                }
                s.sum_left += residual[i as usize];
                s.count_left += 1;
                s.last_val = v;
                s.seen = true;
            }
        }

        // Materialize the chosen splits and reassign samples.
        let mut next_level = Vec::new();
        let mut split_of_node: Vec<Option<Candidate>> = vec![None; nodes.len()];
        for (slot, &node) in level.iter().enumerate() {
            if let Some(best) = scans[slot].best {
                importance[best.feature as usize] += best.gain;
                let left = nodes.len() as u32;
                let right = left + 1;
                nodes.push(TreeNode {
                    feature: LEAF,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    value: 0.0,
                });
                nodes.push(TreeNode {
                    feature: LEAF,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    value: 0.0,
                });
                let parent = &mut nodes[node as usize];
                parent.feature = best.feature;
                parent.threshold = best.threshold;
                parent.left = left;
                parent.right = right;
                split_of_node[node as usize] = Some(best);
                node_stats.push((0.0, 0));
                node_stats.push((0.0, 0));
                next_level.push(left);
                next_level.push(right);
            }
        }
        if next_level.is_empty() {
            break;
        }
        for i in 0..n {
            let node = node_of_sample[i] as usize;
            if let Some(best) = split_of_node[node] {
                let child = if columns[best.feature as usize][i] <= best.threshold {
                    nodes[node].left
                } else {
                    nodes[node].right
                };
                node_of_sample[i] = child;
                let st = &mut node_stats[child as usize];
                st.0 += residual[i];
                st.1 += 1;
            }
        }
        for &node in &next_level {
            let (sum, count) = node_stats[node as usize];
            nodes[node as usize].value = if count > 0 { sum / count as f64 } else { 0.0 };
        }
        level = next_level;
    }

    (Tree { nodes }, node_of_sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit_simple(x: &Array2<f64>, y: &[f64], cfg: &GbtConfig) -> GbtModel {
        let mut log = TrainingLog::default();
        fit(x, y, cfg, &mut log).unwrap()
    }

    fn random_data(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, p));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..p {
                x[(i, j)] = rng.gen_range(-2.0..2.0);
            }
            y.push(x[(i, 0)].sin() + 0.3 * x[(i, 1.min(p - 1))]);
        }
        (x, y)
    }

    #[test]
    fn single_stumpless_tree_is_the_intercept() {
        let (x, y) = random_data(50, 3, 1);
        let cfg = GbtConfig {
            trees: 1,
            max_depth: 0,
            ..GbtConfig::default()
        };
        let m = fit_simple(&x, &y, &cfg);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).to_vec();
            assert!((m.predict(&row) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn step_function_is_driven_to_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200;
        let mut x = Array2::zeros((n, 4));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..4 {
                x[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            y.push(if x[(i, 2)] > 0.0 { 5.0 } else { -1.0 });
        }
        let cfg = GbtConfig {
            trees: 80,
            max_depth: 1,
            ..GbtConfig::default()
        };
        let m = fit_simple(&x, &y, &cfg);
        let mse = (0..n)
            .map(|i| {
                let row: Vec<f64> = x.row(i).to_vec();
                (m.predict(&row) - y[i]).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!(mse.sqrt() < 1e-3, "rmse {}", mse.sqrt());
        // Importance concentrates on the true feature.
        let total: f64 = m.importance.iter().sum();
        assert!(m.importance[2] / total > 0.99);
    }

    #[test]
    fn per_tree_contributions_sum_to_ensemble() {
        let (x, y) = random_data(120, 5, 3);
        let m = fit_simple(&x, &y, &GbtConfig::default());
        for i in (0..x.nrows()).step_by(13) {
            let row: Vec<f64> = x.row(i).to_vec();
            let manual = m.init
                + m.learning_rate * m.trees.iter().map(|t| t.predict(&row)).sum::<f64>();
            assert!((manual - m.predict(&row)).abs() < 1e-9);
        }
    }

    #[test]
    fn training_loss_is_non_increasing() {
        let (x, y) = random_data(150, 4, 4);
        let mut log = TrainingLog::default();
        let _ = fit(&x, &y, &GbtConfig::default(), &mut log).unwrap();
        for w in log.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn monotone_feature_transform_preserves_predictions() {
        let (x, y) = random_data(100, 3, 5);
        let m1 = fit_simple(&x, &y, &GbtConfig::default());
        let mut x2 = x.clone();
        for i in 0..x2.nrows() {
            x2[(i, 0)] = x2[(i, 0)].exp(); // strictly monotone
        }
        let m2 = fit_simple(&x2, &y, &GbtConfig::default());
        let mut p1 = Vec::new();
        let mut p2 = Vec::new();
        for i in 0..x.nrows() {
            let mut r1: Vec<f64> = x.row(i).to_vec();
            let r2: Vec<f64> = x2.row(i).to_vec();
            p1.push(m1.predict(&r1));
            p2.push(m2.predict(&r2));
            r1[0] = r1[0].exp();
            assert!((m2.predict(&r1) - m1.predict(&x.row(i).to_vec())).abs() < 1e-9);
        }
        let argsort = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
            idx
        };
        assert_eq!(argsort(&p1), argsort(&p2));
    }

    #[test]
    fn duplicated_column_keeps_combined_importance() {
        let (x, y) = random_data(200, 3, 6);
        let m1 = fit_simple(&x, &y, &GbtConfig::default());
        // Duplicate feature 0 as an extra column.
        let mut x2 = Array2::zeros((x.nrows(), 4));
        for i in 0..x.nrows() {
            for j in 0..3 {
                x2[(i, j)] = x[(i, j)];
            }
            x2[(i, 3)] = x[(i, 0)];
        }
        let m2 = fit_simple(&x2, &y, &GbtConfig::default());
        let combined = m2.importance[0] + m2.importance[3];
        let single = m1.importance[0];
        assert!(
            (combined - single).abs() <= 0.05 * single.max(1e-12),
            "{combined} vs {single}"
        );
        // Deterministic tie-break: the duplicate (higher index) never wins.
        assert_eq!(m2.importance[3], 0.0);
    }

    #[test]
    fn constant_features_are_skipped() {
        let mut x = Array2::zeros((40, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut y = Vec::new();
        for i in 0..40 {
            x[(i, 0)] = 1.0; // constant
            x[(i, 1)] = rng.gen_range(-1.0..1.0);
            y.push(2.0 * x[(i, 1)]);
        }
        let m = fit_simple(&x, &y, &GbtConfig::default());
        assert_eq!(m.importance[0], 0.0);
        assert!(m.importance[1] > 0.0);
    }
}
