//! Column standardization fit on training data only.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FeatureSchema, FeaturizeError};

/// Per-column mean and population (1/N) standard deviation, plus the
/// retained-column mask. Zero-variance columns are dropped and recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    /// Hash of the schema the stats were fit on.
    pub schema_hash: String,
    /// Hash identifying the standardized output space (source schema plus
    /// retained mask); models pin their inputs to this.
    pub output_hash: String,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub retained: Vec<bool>,
    pub dropped_columns: Vec<String>,
}

impl StandardizationStats {
    pub fn output_dim(&self) -> usize {
        self.retained.iter().filter(|r| **r).count()
    }
}

/// Fit means and population standard deviations on training rows.
pub fn fit_standardizer(
    rows: &[Vec<f64>],
    schema: &FeatureSchema,
) -> Result<StandardizationStats, FeaturizeError> {
    if rows.len() < 2 {
        return Err(FeaturizeError::TooFewRows(rows.len()));
    }
    let p = schema.columns.len();
    let n = rows.len() as f64;
    let mut means = vec![0.0; p];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; p];
    for row in rows {
        for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
            let d = v - m;
            *var += d * d;
        }
    }
    let mut sds = Vec::with_capacity(p);
    let mut retained = Vec::with_capacity(p);
    let mut dropped_columns = Vec::new();
    for (j, var) in vars.iter().enumerate() {
        let sd = (var / n).sqrt();
        if sd < 1e-12 {
            retained.push(false);
            dropped_columns.push(schema.columns[j].clone());
            sds.push(1.0);
        } else {
            retained.push(true);
            sds.push(sd);
        }
    }

    let mut hasher = Sha256::new();
    hasher.update(schema.hash.as_bytes());
    for r in &retained {
        hasher.update(if *r { b"1" } else { b"0" });
    }
    let output_hash = hex::encode(hasher.finalize());

    Ok(StandardizationStats {
        schema_hash: schema.hash.clone(),
        output_hash,
        means,
        sds,
        retained,
        dropped_columns,
    })
}

/// Transform one row into the standardized space (retained columns only).
pub fn apply_standardizer(row: &[f64], stats: &StandardizationStats) -> Vec<f64> {
    let mut out = Vec::with_capacity(stats.output_dim());
    for (j, v) in row.iter().enumerate() {
        if stats.retained[j] {
            out.push((v - stats.means[j]) / stats.sds[j]);
        }
    }
    out
}

/// Recover the original values of the retained columns.
pub fn invert_standardizer(std_row: &[f64], stats: &StandardizationStats) -> Vec<f64> {
    let mut out = Vec::with_capacity(std_row.len());
    let mut k = 0;
    for j in 0..stats.retained.len() {
        if stats.retained[j] {
            out.push(std_row[k] * stats.sds[j] + stats.means[j]);
            k += 1;
        }
    }
    out
}
