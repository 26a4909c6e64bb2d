//! Feedforward network: rectified-linear hidden layers, linear readout,
//! L1-penalized hidden weights, trained with the adaptive-moment optimizer
//! and early stopping on a held-out split. All gradients come from explicit
//! backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{validation_split, xavier_init, Adam};
use super::{FfnnConfig, ModelError, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    /// One weight matrix per hidden layer plus the linear readout.
    pub weights: Vec<Array2<f64>>,
    /// Bias rows matching each weight matrix.
    pub biases: Vec<Array2<f64>>,
    pub l1_penalty: f64,
}

impl FfnnModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let x = Array2::from_shape_vec((1, row.len()), row.to_vec()).unwrap();
        self.forward(&x)[(0, 0)]
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Array1<f64> {
        self.forward(x).column(0).to_owned()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let last = self.weights.len() - 1;
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = a.dot(w) + b;
            if l != last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a
    }

    /// Mean-squared-error loss (plus the L1 term) and its gradients on one
    /// batch, by explicit backpropagation.
    pub(crate) fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        y: &[f64],
        l1: f64,
    ) -> (f64, Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let n = x.nrows() as f64;
        let last = self.weights.len() - 1;

        // Forward, caching post-activations (a[0] is the input).
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w) + b;
            if l != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        let out = &acts[self.weights.len()];
        let mut mse = 0.0;
        let mut delta = Array2::zeros(out.raw_dim());
        for i in 0..out.nrows() {
            let err = out[(i, 0)] - y[i];
            mse += err * err;
            delta[(i, 0)] = 2.0 * err / n;
        }
        mse /= n;
        let mut loss = mse;
        if l1 > 0.0 {
            for w in &self.weights[..last] {
                loss += l1 * w.iter().map(|v| v.abs()).sum::<f64>();
            }
        }

        // Backward.
        let mut d_weights = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut d_biases = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut d_out = delta;
        for l in (0..self.weights.len()).rev() {
            let mut dw = acts[l].t().dot(&d_out);
            if l1 > 0.0 && l != last {
                dw.zip_mut_with(&self.weights[l], |g, w| {
                    *g += l1 * w.signum();
                });
            }
            let db = d_out
                .sum_axis(Axis(0))
                .insert_axis(Axis(0));
            if l > 0 {
                let mut da = d_out.dot(&self.weights[l].t());
                // ReLU mask from the cached post-activation.
                da.zip_mut_with(&acts[l], |d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
                d_out = da;
            }
            d_weights[l] = dw;
            d_biases[l] = db;
        }
        (loss, d_weights, d_biases)
    }
}

pub(super) fn fit(
    x: &Array2<f64>,
    y: &[f64],
    cfg: &FfnnConfig,
    seed: u64,
    log: &mut TrainingLog,
) -> Result<FfnnModel, ModelError> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut dims = vec![p];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let mut model = FfnnModel {
        weights: dims
            .windows(2)
            .map(|d| xavier_init(&mut rng, d[0], d[1]))
            .collect(),
        biases: dims.windows(2).map(|d| Array2::zeros((1, d[1]))).collect(),
        l1_penalty: cfg.l1_penalty,
    };

    let (train_idx, val_idx) = validation_split(n, cfg.early_stopping.validation_fraction, &mut rng);
    let gather = |idx: &[usize]| {
        let mut gx = Array2::zeros((idx.len(), p));
        let mut gy = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            gx.row_mut(r).assign(&x.row(i));
            gy.push(y[i]);
        }
        (gx, gy)
    };
    let (val_x, val_y) = gather(&val_idx);

    let shapes: Vec<(usize, usize)> = model
        .weights
        .iter()
        .chain(&model.biases)
        .map(|a| (a.nrows(), a.ncols()))
        .collect();
    let mut adam = Adam::new(&cfg.optimizer, &shapes);

    let mut order = train_idx.clone();
    let mut best: Option<(f64, FfnnModel)> = None;
    let mut bad_epochs = 0;
    for epoch in 0..cfg.early_stopping.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (bx, by) = gather(chunk);
            let (loss, dw, db) = model.loss_and_grads(&bx, &by, cfg.l1_penalty);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            let mut params: Vec<Array2<f64>> = model
                .weights
                .iter()
                .chain(&model.biases)
                .cloned()
                .collect();
            let grads: Vec<Array2<f64>> = dw.into_iter().chain(db).collect();
            adam.step(&mut params, &grads);
            let nw = model.weights.len();
            for (l, w) in params.drain(..nw).enumerate() {
                model.weights[l] = w;
            }
            for (l, b) in params.into_iter().enumerate() {
                model.biases[l] = b;
            }
        }

        let (train_x, train_y) = gather(&train_idx);
        let (train_loss, _, _) = model.loss_and_grads(&train_x, &train_y, cfg.l1_penalty);
        log.train_loss.push(train_loss);
        log.epochs_run = epoch + 1;
        if !train_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }

        if val_idx.is_empty() {
            continue;
        }
        let preds = model.predict_batch(&val_x);
        let val_loss = preds
            .iter()
            .zip(&val_y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / val_y.len() as f64;
        log.val_loss.push(val_loss);
        match &best {
            Some((b, _)) if val_loss >= *b => {
                bad_epochs += 1;
                if bad_epochs > cfg.early_stopping.patience {
                    break;
                }
            }
            _ => {
                best = Some((val_loss, model.clone()));
                bad_epochs = 0;
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{EarlyStoppingConfig, OptimizerConfig};
    use rand::Rng;

    fn toy_config(hidden: Vec<usize>, l1: f64, lr: f64, epochs: usize) -> FfnnConfig {
        FfnnConfig {
            hidden,
            l1_penalty: l1,
            batch_size: 16,
            optimizer: OptimizerConfig {
                learning_rate: lr,
                ..OptimizerConfig::default()
            },
            early_stopping: EarlyStoppingConfig {
                max_epochs: epochs,
                patience: epochs,
                validation_fraction: 0.1,
            },
        }
    }

    fn toy_data(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, p));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..p {
                x[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            y.push((x[(i, 0)] * 2.0).tanh() + 0.5 * x[(i, 1.min(p - 1))]);
        }
        (x, y)
    }

    #[test]
    fn zero_weights_predict_the_output_bias() {
        let model = FfnnModel {
            weights: vec![Array2::zeros((3, 4)), Array2::zeros((4, 1))],
            biases: vec![Array2::zeros((1, 4)), Array2::from_elem((1, 1), 2.5)],
            l1_penalty: 0.0,
        };
        assert_eq!(model.predict(&[1.0, -2.0, 0.3]), 2.5);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let (x, y) = toy_data(8, 3, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut model = FfnnModel {
            weights: vec![xavier_init(&mut rng, 3, 5), xavier_init(&mut rng, 5, 1)],
            biases: vec![
                xavier_init(&mut rng, 1, 5),
                xavier_init(&mut rng, 1, 1),
            ],
            l1_penalty: 0.0,
        };
        let (_, dw, db) = model.loss_and_grads(&x, &y, 0.0);
        let h = 1e-5;
        let mut max_rel = 0.0_f64;
        for l in 0..model.weights.len() {
            for idx in 0..model.weights[l].len() {
                let (r, c) = (idx / model.weights[l].ncols(), idx % model.weights[l].ncols());
                let orig = model.weights[l][(r, c)];
                model.weights[l][(r, c)] = orig + h;
                let (lp, _, _) = model.loss_and_grads(&x, &y, 0.0);
                model.weights[l][(r, c)] = orig - h;
                let (lm, _, _) = model.loss_and_grads(&x, &y, 0.0);
                model.weights[l][(r, c)] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = dw[l][(r, c)];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
            }
            for c in 0..model.biases[l].ncols() {
                let orig = model.biases[l][(0, c)];
                model.biases[l][(0, c)] = orig + h;
                let (lp, _, _) = model.loss_and_grads(&x, &y, 0.0);
                model.biases[l][(0, c)] = orig - h;
                let (lm, _, _) = model.loss_and_grads(&x, &y, 0.0);
                model.biases[l][(0, c)] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = db[l][(0, c)];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn strong_l1_drives_first_layer_weights_to_zero() {
        let (x, y) = toy_data(64, 3, 23);
        let cfg = toy_config(vec![5], 5.0, 1e-4, 400);
        let mut log = TrainingLog::default();
        let model = fit(&x, &y, &cfg, 3, &mut log).unwrap();
        let max_w = model.weights[0]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max_w < 1e-3, "max |w| = {max_w}");
    }

    #[test]
    fn learns_a_smooth_function() {
        let (x, y) = toy_data(400, 3, 24);
        let cfg = toy_config(vec![16, 16], 0.0, 3e-3, 60);
        let mut log = TrainingLog::default();
        let model = fit(&x, &y, &cfg, 5, &mut log).unwrap();
        let preds = model.predict_batch(&x);
        let mse: f64 = preds
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / y.len() as f64;
        assert!(mse < 0.01, "mse {mse}");
        assert!(log.epochs_run > 5);
    }

    #[test]
    fn fixed_seed_is_bit_deterministic() {
        let (x, y) = toy_data(64, 4, 25);
        let cfg = toy_config(vec![8], 1e-4, 1e-3, 10);
        let mut log1 = TrainingLog::default();
        let m1 = fit(&x, &y, &cfg, 9, &mut log1).unwrap();
        let mut log2 = TrainingLog::default();
        let m2 = fit(&x, &y, &cfg, 9, &mut log2).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(log1.train_loss, log2.train_loss);
    }
}
