//! Baseline intercept-only model: predicts the training mean everywhere.

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterceptModel {
    pub mean: f64,
    pub n: usize,
}

pub(super) fn fit(targets: &[f64]) -> Result<InterceptModel, ModelError> {
    if targets.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    Ok(InterceptModel {
        mean,
        n: targets.len(),
    })
}

impl InterceptModel {
    pub fn predict(&self) -> f64 {
        self.mean
    }
}
