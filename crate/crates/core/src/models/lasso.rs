//! L1-penalized linear regression by cyclic coordinate descent.
//!
//! Minimizes `(1/2n)·||y - b0 - X·b||² + lambda·||b||_1` along a descending
//! lambda path with warm starts. The reported model is the one at the
//! largest lambda whose k-fold CV error is within one standard error of the
//! minimum (the 1-SE rule); the full coefficient path is kept.

use ndarray::Array2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LassoConfig, ModelError, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPathPoint {
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoCvPoint {
    pub lambda: f64,
    pub mean_mse: f64,
    pub se_mse: f64,
    /// False when coordinate descent failed to converge in any fold.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub path: Vec<LassoPathPoint>,
    pub cv: Vec<LassoCvPoint>,
}

impl LassoModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

struct Centered {
    cols: Vec<Vec<f64>>,
    col_means: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
    /// (1/n)·||x_j||² of the centered columns.
    z: Vec<f64>,
}

fn center(x: &Array2<f64>, y: &[f64], rows: Option<&[usize]>) -> Centered {
    let idx: Vec<usize> = match rows {
        Some(r) => r.to_vec(),
        None => (0..x.nrows()).collect(),
    };
    let n = idx.len() as f64;
    let p = x.ncols();
    let mut col_means = vec![0.0; p];
    for &i in &idx {
        for j in 0..p {
            col_means[j] += x[(i, j)];
        }
    }
    for m in &mut col_means {
        *m /= n;
    }
    let y_mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let mut cols = vec![Vec::with_capacity(idx.len()); p];
    for &i in &idx {
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(x[(i, j)] - col_means[j]);
        }
    }
    let z = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n)
        .collect();
    let yc = idx.iter().map(|&i| y[i] - y_mean).collect();
    Centered {
        cols,
        col_means,
        y: yc,
        y_mean,
        z,
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// One path fit over a descending lambda grid with warm starts.
fn fit_path(data: &Centered, grid: &[f64], cfg: &LassoConfig) -> Vec<LassoPathPoint> {
    let n = data.y.len() as f64;
    let p = data.cols.len();
    let mut beta = vec![0.0; p];
    let mut residual = data.y.clone();
    let mut path = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < cfg.max_sweeps {
            sweeps += 1;
            let mut max_delta = 0.0_f64;
            for j in 0..p {
                if data.z[j] <= 0.0 {
                    continue;
                }
                let col = &data.cols[j];
                let mut dot = 0.0;
                for (c, r) in col.iter().zip(&residual) {
                    dot += c * r;
                }
                let rho = dot / n + data.z[j] * beta[j];
                let new = soft_threshold(rho, lambda) / data.z[j];
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (c, r) in col.iter().zip(residual.iter_mut()) {
                        *r -= c * delta;
                    }
                    beta[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < cfg.tol {
                converged = true;
                break;
            }
        }
        let intercept =
            data.y_mean - data.col_means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
        path.push(LassoPathPoint {
            lambda,
            intercept,
            coefficients: beta.clone(),
            converged,
            sweeps,
        });
    }
    path
}

fn auto_grid(data: &Centered, cfg: &LassoConfig) -> Vec<f64> {
    let n = data.y.len() as f64;
    let lambda_max = data
        .cols
        .iter()
        .map(|c| c.iter().zip(&data.y).map(|(x, y)| x * y).sum::<f64>().abs() / n)
        .fold(0.0_f64, f64::max)
        .max(1e-3);
    let ratio = cfg.lambda_min_ratio.max(1e-6);
    let k = cfg.n_lambda.max(2);
    (0..k)
        .map(|i| lambda_max * ratio.powf(i as f64 / (k - 1) as f64))
        .collect()
}

pub(super) fn fit(
    x: &Array2<f64>,
    y: &[f64],
    cfg: &LassoConfig,
    seed: u64,
    log: &mut TrainingLog,
) -> Result<LassoModel, ModelError> {
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(ModelError::EmptyTrainingSet);
    }
    let full = center(x, y, None);
    let grid: Vec<f64> = match &cfg.lambda_grid {
        Some(g) => {
            let mut g = g.clone();
            g.sort_by(|a, b| b.partial_cmp(a).unwrap());
            g
        }
        None => auto_grid(&full, cfg),
    };

    // k-fold CV on shuffled rows, every fold fit over the same grid.
    let k = cfg.k_folds.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_mse = vec![vec![0.0_f64; k]; grid.len()];
    let mut valid = vec![true; grid.len()];
    for f in 0..k {
        let test: Vec<usize> = order.iter().copied().skip(f).step_by(k).collect();
        let train: Vec<usize> = order
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| i % k != f)
            .map(|(_, v)| v)
            .collect();
        let data = center(x, y, Some(&train));
        let path = fit_path(&data, &grid, cfg);
        for (g, point) in path.iter().enumerate() {
            if !point.converged {
                valid[g] = false;
                log.warnings.push(format!(
                    "lasso fold {f} did not converge at lambda={:.6}; excluded",
                    point.lambda
                ));
            }
            let mse = test
                .iter()
                .map(|&i| {
                    let row = x.row(i);
                    let pred = point.intercept
                        + row
                            .iter()
                            .zip(&point.coefficients)
                            .map(|(v, b)| v * b)
                            .sum::<f64>();
                    (pred - y[i]).powi(2)
                })
                .sum::<f64>()
                / test.len().max(1) as f64;
            fold_mse[g][f] = mse;
        }
    }

    let mut cv = Vec::with_capacity(grid.len());
    for (g, &lambda) in grid.iter().enumerate() {
        let mean = fold_mse[g].iter().sum::<f64>() / k as f64;
        let var = fold_mse[g].iter().map(|m| (m - mean).powi(2)).sum::<f64>()
            / (k.saturating_sub(1)).max(1) as f64;
        cv.push(LassoCvPoint {
            lambda,
            mean_mse: mean,
            se_mse: (var / k as f64).sqrt(),
            valid: valid[g],
        });
    }

    // Full-data path, then the 1-SE rule over valid grid points.
    let path = fit_path(&full, &grid, cfg);
    for point in &path {
        if !point.converged {
            log.warnings.push(format!(
                "lasso full fit did not converge at lambda={:.6}; excluded",
                point.lambda
            ));
        }
    }
    let usable =
        |g: usize| cv[g].valid && path[g].converged && cv[g].mean_mse.is_finite();
    let best = (0..grid.len())
        .filter(|&g| usable(g))
        .min_by(|&a, &b| cv[a].mean_mse.partial_cmp(&cv[b].mean_mse).unwrap())
        .ok_or(ModelError::NonConvergence {
            lambda: *grid.last().unwrap(),
        })?;
    let threshold = cv[best].mean_mse + cv[best].se_mse;
    // Grid is descending: the first usable lambda within the threshold is
    // the largest.
    let chosen = (0..grid.len())
        .find(|&g| usable(g) && cv[g].mean_mse <= threshold)
        .unwrap_or(best);

    log.epochs_run = path[chosen].sweeps;
    Ok(LassoModel {
        intercept: path[chosen].intercept,
        coefficients: path[chosen].coefficients.clone(),
        lambda: grid[chosen],
        path,
        cv,
    })
}
