//! Stacked LSTM with per-frame linear readout, trained by backpropagation
//! through time on padded, masked sequences.
//!
//! Gates follow the standard cell: `i, f, g, o` from one fused affine map,
//! `c_t = f⊙c + i⊙g`, `h_t = o⊙tanh(c_t)`. Recurrent dropout is
//! variational: one mask per sequence per pass, applied to the hidden state
//! entering the recurrent matmul, disabled at prediction. The loss is
//! masked per-frame mean squared error over real frames only, so padded
//! rows contribute nothing.

use ndarray::{s, Array2, Axis};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::featurize::FeatureSequence;

use super::nn::{clip_global_norm, validation_split, xavier_init, Adam};
use super::{LstmConfig, ModelError, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    /// `[input_dim, 4H]`, gate order `i|f|g|o`.
    pub w_ih: Array2<f64>,
    /// `[H, 4H]`.
    pub w_hh: Array2<f64>,
    /// `[1, 4H]`.
    pub b: Array2<f64>,
}

impl LstmLayer {
    fn hidden(&self) -> usize {
        self.w_hh.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub layers: Vec<LstmLayer>,
    /// `[H_last, 1]` per-frame readout.
    pub w_out: Array2<f64>,
    pub b_out: Array2<f64>,
    pub input_dim: usize,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Per-(t, layer) forward cache for BPTT.
struct StepCache {
    input: Array2<f64>,
    h_prev_masked: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// A padded minibatch view: `x[t]` is `[B, P]`, `y[t]`/`mask[t]` are `[B]`.
struct Batch {
    x: Vec<Array2<f64>>,
    y: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
    n_real: usize,
}

impl Batch {
    fn from_sequences(seqs: &[&FeatureSequence]) -> Batch {
        let b = seqs.len();
        let p = seqs[0].rows.ncols();
        let t_max = seqs.iter().map(|s| s.len).max().unwrap_or(0);
        let mut x = Vec::with_capacity(t_max);
        let mut y = Vec::with_capacity(t_max);
        let mut mask = Vec::with_capacity(t_max);
        let mut n_real = 0;
        for t in 0..t_max {
            let mut xt = Array2::zeros((b, p));
            let mut yt = vec![0.0; b];
            let mut mt = vec![false; b];
            for (k, seq) in seqs.iter().enumerate() {
                if t < seq.len {
                    xt.row_mut(k).assign(&seq.rows.row(t));
                    yt[k] = seq.targets[t];
                    mt[k] = true;
                    n_real += 1;
                }
            }
            x.push(xt);
            y.push(yt);
            mask.push(mt);
        }
        Batch {
            x,
            y,
            mask,
            n_real,
        }
    }
}

struct ForwardPass {
    caches: Vec<Vec<StepCache>>,
    h_last: Vec<Array2<f64>>,
    yhat: Vec<Array2<f64>>,
    loss: f64,
}

impl LstmModel {
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden()).collect()
    }

    /// Run the network over a batch. `rmasks[l]` is `[B, H_l]` (ones when
    /// dropout is off). Returns caches only when `keep_caches` is set.
    fn forward(
        &self,
        batch: &Batch,
        rmasks: &[Array2<f64>],
        keep_caches: bool,
    ) -> ForwardPass {
        let b = batch.x.first().map(|x| x.nrows()).unwrap_or(0);
        let t_max = batch.x.len();
        let mut h: Vec<Array2<f64>> = self
            .layers
            .iter()
            .map(|l| Array2::zeros((b, l.hidden())))
            .collect();
        let mut c = h.clone();
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(t_max);
        let mut h_last = Vec::with_capacity(t_max);
        let mut yhat = Vec::with_capacity(t_max);
        let mut loss = 0.0;

        for t in 0..t_max {
            let mut level_caches = Vec::with_capacity(self.layers.len());
            let mut input = batch.x[t].clone();
            for (l, layer) in self.layers.iter().enumerate() {
                let hsize = layer.hidden();
                let h_prev_masked = &h[l] * &rmasks[l];
                let z = input.dot(&layer.w_ih) + h_prev_masked.dot(&layer.w_hh) + &layer.b;
                let i = z.slice(s![.., 0..hsize]).mapv(sigmoid);
                let f = z.slice(s![.., hsize..2 * hsize]).mapv(sigmoid);
                let g = z.slice(s![.., 2 * hsize..3 * hsize]).mapv(f64::tanh);
                let o = z.slice(s![.., 3 * hsize..4 * hsize]).mapv(sigmoid);
                let c_prev = c[l].clone();
                c[l] = &f * &c_prev + &i * &g;
                let tanh_c = c[l].mapv(f64::tanh);
                let h_new = &o * &tanh_c;
                if keep_caches {
                    level_caches.push(StepCache {
                        input: input.clone(),
                        h_prev_masked,
                        c_prev,
                        i,
                        f,
                        g,
                        o,
                        tanh_c,
                    });
                }
                h[l] = h_new.clone();
                input = h_new;
            }
            let out = input.dot(&self.w_out) + &self.b_out;
            for k in 0..b {
                if batch.mask[t][k] {
                    let err = out[(k, 0)] - batch.y[t][k];
                    loss += err * err;
                }
            }
            if keep_caches {
                caches.push(level_caches);
            }
            h_last.push(h[self.layers.len() - 1].clone());
            yhat.push(out);
        }
        loss /= batch.n_real.max(1) as f64;
        ForwardPass {
            caches,
            h_last,
            yhat,
            loss,
        }
    }

    /// Full BPTT over one batch. Returns the masked loss and gradients in
    /// parameter order (`w_ih, w_hh, b` per layer, then `w_out, b_out`).
    fn loss_and_grads(
        &self,
        batch: &Batch,
        rmasks: &[Array2<f64>],
    ) -> (f64, Vec<Array2<f64>>) {
        let pass = self.forward(batch, rmasks, true);
        let b = batch.x.first().map(|x| x.nrows()).unwrap_or(0);
        let t_max = batch.x.len();
        let n_layers = self.layers.len();
        let n_real = batch.n_real.max(1) as f64;

        let mut d_layers: Vec<[Array2<f64>; 3]> = self
            .layers
            .iter()
            .map(|l| {
                [
                    Array2::zeros(l.w_ih.raw_dim()),
                    Array2::zeros(l.w_hh.raw_dim()),
                    Array2::zeros(l.b.raw_dim()),
                ]
            })
            .collect();
        let mut d_wout = Array2::zeros(self.w_out.raw_dim());
        let mut d_bout = Array2::zeros(self.b_out.raw_dim());
        let mut dh_next: Vec<Array2<f64>> = self
            .layers
            .iter()
            .map(|l| Array2::zeros((b, l.hidden())))
            .collect();
        let mut dc_next = dh_next.clone();

        for t in (0..t_max).rev() {
            let mut d_yhat = Array2::zeros((b, 1));
            for k in 0..b {
                if batch.mask[t][k] {
                    d_yhat[(k, 0)] = 2.0 * (pass.yhat[t][(k, 0)] - batch.y[t][k]) / n_real;
                }
            }
            d_wout += &pass.h_last[t].t().dot(&d_yhat);
            d_bout += &d_yhat.sum_axis(Axis(0)).insert_axis(Axis(0));
            let mut d_from_above = d_yhat.dot(&self.w_out.t());

            for l in (0..n_layers).rev() {
                let cache = &pass.caches[t][l];
                let layer = &self.layers[l];
                let hsize = layer.hidden();
                let dh = &dh_next[l] + &d_from_above;
                let one_minus_tc2 = cache.tanh_c.mapv(|v| 1.0 - v * v);
                let dc = &dc_next[l] + &(&dh * &cache.o * &one_minus_tc2);

                let d_o = &dh * &cache.tanh_c;
                let dz_o = &d_o * &cache.o.mapv(|v| v * (1.0 - v));
                let d_i = &dc * &cache.g;
                let dz_i = &d_i * &cache.i.mapv(|v| v * (1.0 - v));
                let d_f = &dc * &cache.c_prev;
                let dz_f = &d_f * &cache.f.mapv(|v| v * (1.0 - v));
                let d_g = &dc * &cache.i;
                let dz_g = &d_g * &cache.g.mapv(|v| 1.0 - v * v);

                let mut dz = Array2::zeros((b, 4 * hsize));
                dz.slice_mut(s![.., 0..hsize]).assign(&dz_i);
                dz.slice_mut(s![.., hsize..2 * hsize]).assign(&dz_f);
                dz.slice_mut(s![.., 2 * hsize..3 * hsize]).assign(&dz_g);
                dz.slice_mut(s![.., 3 * hsize..4 * hsize]).assign(&dz_o);

                d_layers[l][0] += &cache.input.t().dot(&dz);
                d_layers[l][1] += &cache.h_prev_masked.t().dot(&dz);
                d_layers[l][2] += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));

                dh_next[l] = dz.dot(&layer.w_hh.t()) * &rmasks[l];
                dc_next[l] = &dc * &cache.f;
                d_from_above = dz.dot(&layer.w_ih.t());
                // d_from_above now holds the gradient w.r.t. this layer's
                // input, consumed by the layer below (or dropped at l=0).
            }
        }

        let mut grads = Vec::with_capacity(3 * n_layers + 2);
        for d in d_layers {
            grads.extend(d);
        }
        grads.push(d_wout);
        grads.push(d_bout);
        (pass.loss, grads)
    }

    fn masked_loss(&self, seqs: &[&FeatureSequence], batch_size: usize) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for chunk in seqs.chunks(batch_size.max(1)) {
            let batch = Batch::from_sequences(chunk);
            let rmasks = self.unit_masks(chunk.len());
            let pass = self.forward(&batch, &rmasks, false);
            total += pass.loss * batch.n_real as f64;
            n += batch.n_real;
        }
        total / n.max(1) as f64
    }

    fn unit_masks(&self, b: usize) -> Vec<Array2<f64>> {
        self.layers
            .iter()
            .map(|l| Array2::ones((b, l.hidden())))
            .collect()
    }

    /// One prediction per real frame, dropout off.
    pub fn predict_sequence(&self, seq: &FeatureSequence) -> Vec<f64> {
        let batch = Batch::from_sequences(&[seq]);
        let pass = self.forward(&batch, &self.unit_masks(1), false);
        (0..seq.len).map(|t| pass.yhat[t][(0, 0)]).collect()
    }

    /// Treat each row as the first frame of a fresh carry.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let b = rows.len();
        let p = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut xt = Array2::zeros((b, p));
        for (k, r) in rows.iter().enumerate() {
            xt.row_mut(k)
                .assign(&ndarray::ArrayView1::from(r.as_slice()));
        }
        let batch = Batch {
            x: vec![xt],
            y: vec![vec![0.0; b]],
            mask: vec![vec![true; b]],
            n_real: b,
        };
        let pass = self.forward(&batch, &self.unit_masks(b), false);
        (0..b).map(|k| pass.yhat[0][(k, 0)]).collect()
    }

    fn params(&self) -> Vec<Array2<f64>> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.w_ih.clone());
            out.push(l.w_hh.clone());
            out.push(l.b.clone());
        }
        out.push(self.w_out.clone());
        out.push(self.b_out.clone());
        out
    }

    fn set_params(&mut self, params: Vec<Array2<f64>>) {
        let mut it = params.into_iter();
        for l in &mut self.layers {
            l.w_ih = it.next().unwrap();
            l.w_hh = it.next().unwrap();
            l.b = it.next().unwrap();
        }
        self.w_out = it.next().unwrap();
        self.b_out = it.next().unwrap();
    }
}

fn init_model(input_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> LstmModel {
    let mut layers = Vec::with_capacity(hidden.len());
    let mut in_dim = input_dim;
    for &h in hidden {
        let mut b = Array2::zeros((1, 4 * h));
        // Forget-gate bias starts at 1 so early training does not forget.
        b.slice_mut(s![.., h..2 * h]).fill(1.0);
        layers.push(LstmLayer {
            w_ih: xavier_init(rng, in_dim, 4 * h),
            w_hh: xavier_init(rng, h, 4 * h),
            b,
        });
        in_dim = h;
    }
    LstmModel {
        layers,
        w_out: xavier_init(rng, in_dim, 1),
        b_out: Array2::zeros((1, 1)),
        input_dim,
    }
}

fn dropout_masks(
    model: &LstmModel,
    b: usize,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Array2<f64>> {
    let keep = 1.0 - rate;
    model
        .layers
        .iter()
        .map(|l| {
            Array2::from_shape_fn((b, l.hidden()), |_| {
                if rate > 0.0 && rng.gen::<f64>() < rate {
                    0.0
                } else {
                    1.0 / keep
                }
            })
        })
        .collect()
}

pub(super) fn fit(
    sequences: &[FeatureSequence],
    cfg: &LstmConfig,
    seed: u64,
    log: &mut TrainingLog,
) -> Result<LstmModel, ModelError> {
    let usable: Vec<&FeatureSequence> = sequences.iter().filter(|s| s.len > 0).collect();
    if usable.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let input_dim = usable[0].rows.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = init_model(input_dim, &cfg.hidden, &mut rng);

    let (train_idx, val_idx) =
        validation_split(usable.len(), cfg.early_stopping.validation_fraction, &mut rng);
    let train: Vec<&FeatureSequence> = train_idx.iter().map(|&i| usable[i]).collect();
    let val: Vec<&FeatureSequence> = val_idx.iter().map(|&i| usable[i]).collect();

    // Length-sorted batches keep padding small; the batch order is shuffled
    // each epoch.
    let mut by_len: Vec<usize> = (0..train.len()).collect();
    by_len.sort_by_key(|&i| std::cmp::Reverse(train[i].len));
    let batches_idx: Vec<Vec<usize>> = by_len
        .chunks(cfg.batch_size.max(1))
        .map(|c| c.to_vec())
        .collect();

    let shapes: Vec<(usize, usize)> = model
        .params()
        .iter()
        .map(|a| (a.nrows(), a.ncols()))
        .collect();
    let mut adam = Adam::new(&cfg.optimizer, &shapes);

    let mut batch_order: Vec<usize> = (0..batches_idx.len()).collect();
    let mut best: Option<(f64, LstmModel)> = None;
    let mut bad_epochs = 0;
    for epoch in 0..cfg.early_stopping.max_epochs {
        batch_order.shuffle(&mut rng);
        for &bi in &batch_order {
            let chunk: Vec<&FeatureSequence> =
                batches_idx[bi].iter().map(|&i| train[i]).collect();
            let batch = Batch::from_sequences(&chunk);
            let rmasks = dropout_masks(&model, chunk.len(), cfg.recurrent_dropout, &mut rng);
            let (loss, mut grads) = model.loss_and_grads(&batch, &rmasks);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            if clip_global_norm(&mut grads, cfg.grad_clip_norm) {
                log.clip_events += 1;
            }
            let mut params = model.params();
            adam.step(&mut params, &grads);
            model.set_params(params);
        }

        let train_loss = model.masked_loss(&train, cfg.batch_size);
        if !train_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        log.train_loss.push(train_loss);
        log.epochs_run = epoch + 1;

        if val.is_empty() {
            continue;
        }
        let val_loss = model.masked_loss(&val, cfg.batch_size);
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
