//! Pieces shared by the two neural models: adaptive-moment optimization,
//! weight initialization, and the training-split helper.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::OptimizerConfig;

/// Adaptive-moment estimation over a list of parameter matrices.
pub struct Adam {
    cfg: OptimizerConfig,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(cfg: &OptimizerConfig, shapes: &[(usize, usize)]) -> Adam {
        Adam {
            cfg: cfg.clone(),
            t: 0,
            m: shapes.iter().map(|&(r, c)| Array2::zeros((r, c))).collect(),
            v: shapes.iter().map(|&(r, c)| Array2::zeros((r, c))).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t);
        let bias2 = 1.0 - b2.powi(self.t);
        let lr = self.cfg.learning_rate;
        let eps = self.cfg.epsilon;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::azip!((p in p, &g in g, m in m, v in v) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mh = *m / bias1;
                let vh = *v / bias2;
                *p -= lr * mh / (vh.sqrt() + eps);
            });
        }
    }
}

/// Glorot-uniform initialization.
pub fn xavier_init(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Scale every gradient so the global norm stays under `clip`; returns true
/// when clipping fired.
pub fn clip_global_norm(grads: &mut [Array2<f64>], clip: f64) -> bool {
    let norm2: f64 = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum();
    let norm = norm2.sqrt();
    if norm > clip {
        let scale = clip / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|v| v * scale);
        }
        true
    } else {
        false
    }
}

/// Deterministic train/validation index split.
pub fn validation_split(
    n: usize,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_val = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
    let val = idx[..n_val].to_vec();
    let train = idx[n_val..].to_vec();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_moves_toward_a_quadratic_minimum() {
        let cfg = OptimizerConfig {
            learning_rate: 0.05,
            ..OptimizerConfig::default()
        };
        let mut params = vec![Array2::from_elem((1, 1), 5.0)];
        let mut adam = Adam::new(&cfg, &[(1, 1)]);
        for _ in 0..500 {
            let g = vec![params[0].mapv(|w| 2.0 * (w - 1.5))];
            adam.step(&mut params, &g);
        }
        assert!((params[0][(0, 0)] - 1.5).abs() < 1e-3);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let mut grads = vec![Array2::from_elem((2, 2), 10.0)];
        assert!(clip_global_norm(&mut grads, 5.0));
        let norm: f64 = grads[0].iter().map(|v| v * v).sum::<f64>();
        assert!((norm.sqrt() - 5.0).abs() < 1e-12);
        let mut small = vec![Array2::from_elem((1, 1), 0.1)];
        assert!(!clip_global_norm(&mut small, 5.0));
    }

    #[test]
    fn split_is_disjoint_and_sized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (train, val) = validation_split(100, 0.1, &mut rng);
        assert_eq!(val.len(), 10);
        assert_eq!(train.len(), 90);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
