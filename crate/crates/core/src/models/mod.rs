//! The five ball-carrier regression families behind one interface.
//!
//! Every family is fit from `(data, config, seed)` deterministically and
//! predicts expected yards gained from the current position. Sequence
//! models consume padded [`FeatureSequence`]s; row models see the same
//! frames flattened. Trained models serialize to a self-describing JSON
//! container with family tag, config, schema hash, seed, and parameters.

mod ffnn;
mod gbt;
mod intercept;
mod lasso;
mod lstm;
pub(crate) mod nn;

pub use ffnn::FfnnModel;
pub use gbt::GbtModel;
pub use intercept::InterceptModel;
pub use lasso::LassoModel;
pub use lstm::LstmModel;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::FeatureSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Intercept,
    Lasso,
    Gbt,
    Ffnn,
    Lstm,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelFamily::Intercept => "intercept",
            ModelFamily::Lasso => "lasso",
            ModelFamily::Gbt => "gbt",
            ModelFamily::Ffnn => "ffnn",
            ModelFamily::Lstm => "lstm",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "intercept" => Ok(ModelFamily::Intercept),
            "lasso" => Ok(ModelFamily::Lasso),
            "gbt" => Ok(ModelFamily::Gbt),
            "ffnn" => Ok(ModelFamily::Ffnn),
            "lstm" => Ok(ModelFamily::Lstm),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// Explicit grid (descending); generated from the data when absent.
    pub lambda_grid: Option<Vec<f64>>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub k_folds: usize,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda_grid: None,
            n_lambda: 50,
            lambda_min_ratio: 1e-3,
            k_folds: 5,
            max_sweeps: 5000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            trees: 100,
            max_depth: 3,
            learning_rate: 0.3,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStoppingConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for EarlyStoppingConfig {
    fn default() -> Self {
        EarlyStoppingConfig {
            max_epochs: 50,
            patience: 5,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfnnConfig {
    pub hidden: Vec<usize>,
    pub l1_penalty: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub early_stopping: EarlyStoppingConfig,
}

impl Default for FfnnConfig {
    fn default() -> Self {
        FfnnConfig {
            hidden: vec![50, 50],
            l1_penalty: 1e-4,
            batch_size: 256,
            optimizer: OptimizerConfig::default(),
            early_stopping: EarlyStoppingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden: Vec<usize>,
    pub recurrent_dropout: f64,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub optimizer: OptimizerConfig,
    pub early_stopping: EarlyStoppingConfig,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden: vec![50, 50],
            recurrent_dropout: 0.2,
            batch_size: 32,
            grad_clip_norm: 5.0,
            optimizer: OptimizerConfig::default(),
            early_stopping: EarlyStoppingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyConfig {
    Intercept,
    Lasso(LassoConfig),
    Gbt(GbtConfig),
    Ffnn(FfnnConfig),
    Lstm(LstmConfig),
}

impl FamilyConfig {
    pub fn family(&self) -> ModelFamily {
        match self {
            FamilyConfig::Intercept => ModelFamily::Intercept,
            FamilyConfig::Lasso(_) => ModelFamily::Lasso,
            FamilyConfig::Gbt(_) => ModelFamily::Gbt,
            FamilyConfig::Ffnn(_) => ModelFamily::Ffnn,
            FamilyConfig::Lstm(_) => ModelFamily::Lstm,
        }
    }

    pub fn default_for(family: ModelFamily) -> FamilyConfig {
        match family {
            ModelFamily::Intercept => FamilyConfig::Intercept,
            ModelFamily::Lasso => FamilyConfig::Lasso(LassoConfig::default()),
            ModelFamily::Gbt => FamilyConfig::Gbt(GbtConfig::default()),
            ModelFamily::Ffnn => FamilyConfig::Ffnn(FfnnConfig::default()),
            ModelFamily::Lstm => FamilyConfig::Lstm(LstmConfig::default()),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        match self {
            FamilyConfig::Intercept => Ok(()),
            FamilyConfig::Lasso(c) => {
                if c.k_folds < 2 {
                    return bad("lasso k_folds must be >= 2");
                }
                if let Some(grid) = &c.lambda_grid {
                    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
                        return bad("lasso lambda grid must be finite and nonnegative");
                    }
                }
                Ok(())
            }
            FamilyConfig::Gbt(c) => {
                if c.trees == 0 {
                    return bad("gbt needs at least one tree");
                }
                if !(0.0..=1.0).contains(&c.learning_rate) {
                    return bad("gbt learning_rate must be in (0, 1]");
                }
                Ok(())
            }
            FamilyConfig::Ffnn(c) => {
                if c.hidden.is_empty() || c.hidden.iter().any(|h| *h == 0) {
                    return bad("ffnn hidden layers must be nonempty");
                }
                Ok(())
            }
            FamilyConfig::Lstm(c) => {
                if c.hidden.is_empty() || c.hidden.iter().any(|h| *h == 0) {
                    return bad("lstm hidden layers must be nonempty");
                }
                if !(0.0..1.0).contains(&c.recurrent_dropout) {
                    return bad("lstm recurrent_dropout must be in [0, 1)");
                }
                Ok(())
            }
        }
    }
}

/// The fit contract: family, hyperparameters, and the rng seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub family: FamilyConfig,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(family: FamilyConfig, seed: u64) -> ModelConfig {
        ModelConfig { family, seed }
    }
}

/// Loss trajectories and anomalies recorded during a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub clip_events: usize,
    pub warnings: Vec<String>,
}

impl TrainingLog {
    /// Flag any loss increase beyond the adaptive-optimizer allowance.
    pub(crate) fn check_monotone(&mut self, tol: f64) {
        for w in self.train_loss.windows(2) {
            if w[1] > w[0] + tol {
                self.warnings.push(format!(
                    "training loss increased from {:.6} to {:.6}",
                    w[0], w[1]
                ));
                return;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub family: ModelFamily,
    pub config: ModelConfig,
    pub seed: u64,
    /// Hash of the standardized input space the model was fit on.
    pub schema_hash: String,
    pub input_dim: usize,
    pub training_log: TrainingLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyModel {
    Intercept(InterceptModel),
    Lasso(LassoModel),
    Gbt(GbtModel),
    Ffnn(FfnnModel),
    Lstm(LstmModel),
}

/// A fit model plus its provenance; the uniform predict surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub meta: ModelMetadata,
    pub params: FamilyModel,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("coordinate descent did not converge at lambda={lambda}")]
    NonConvergence { lambda: f64 },
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("input has {got} features, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("{family} does not support {what}")]
    Unsupported { family: ModelFamily, what: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model file error: {0}")]
    Serialization(String),
}

/// Flatten the real (unmasked) frames of a sequence batch into a row matrix
/// and target vector.
pub fn flatten_sequences(sequences: &[FeatureSequence]) -> (Array2<f64>, Vec<f64>) {
    let p = sequences.first().map(|s| s.rows.ncols()).unwrap_or(0);
    let n: usize = sequences.iter().map(|s| s.len).sum();
    let mut x = Array2::zeros((n, p));
    let mut y = Vec::with_capacity(n);
    let mut i = 0;
    for seq in sequences {
        for l in 0..seq.len {
            x.row_mut(i).assign(&seq.rows.row(l));
            y.push(seq.targets[l]);
            i += 1;
        }
    }
    (x, y)
}

/// Fit one model family on standardized sequences.
pub fn fit(
    config: &ModelConfig,
    sequences: &[FeatureSequence],
    schema_hash: &str,
) -> Result<TrainedModel, ModelError> {
    config.family.validate()?;
    if sequences.is_empty() || sequences.iter().all(|s| s.len == 0) {
        return Err(ModelError::EmptyTrainingSet);
    }
    let input_dim = sequences[0].rows.ncols();
    let mut log = TrainingLog::default();
    let params = match &config.family {
        FamilyConfig::Intercept => {
            let (_, y) = flatten_sequences(sequences);
            FamilyModel::Intercept(intercept::fit(&y)?)
        }
        FamilyConfig::Lasso(c) => {
            let (x, y) = flatten_sequences(sequences);
            FamilyModel::Lasso(lasso::fit(&x, &y, c, config.seed, &mut log)?)
        }
        FamilyConfig::Gbt(c) => {
            let (x, y) = flatten_sequences(sequences);
            FamilyModel::Gbt(gbt::fit(&x, &y, c, &mut log)?)
        }
        FamilyConfig::Ffnn(c) => {
            let (x, y) = flatten_sequences(sequences);
            FamilyModel::Ffnn(ffnn::fit(&x, &y, c, config.seed, &mut log)?)
        }
        FamilyConfig::Lstm(c) => {
            FamilyModel::Lstm(lstm::fit(sequences, c, config.seed, &mut log)?)
        }
    };
    log.check_monotone(1e-6);
    Ok(TrainedModel {
        meta: ModelMetadata {
            family: config.family.family(),
            config: config.clone(),
            seed: config.seed,
            schema_hash: schema_hash.to_string(),
            input_dim,
            training_log: log,
        },
        params,
    })
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.meta.family
    }

    fn check_dim(&self, got: usize) -> Result<(), ModelError> {
        if got != self.meta.input_dim {
            return Err(ModelError::SchemaMismatch {
                expected: self.meta.input_dim,
                got,
            });
        }
        Ok(())
    }

    /// Predict expected yards gained for one standardized row.
    ///
    /// For the sequence model this treats the row as a carry's first frame.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(row.len())?;
        let v = match &self.params {
            FamilyModel::Intercept(m) => m.predict(),
            FamilyModel::Lasso(m) => m.predict(row),
            FamilyModel::Gbt(m) => m.predict(row),
            FamilyModel::Ffnn(m) => m.predict(row),
            FamilyModel::Lstm(m) => m.predict_rows(std::slice::from_ref(&row.to_vec()))[0],
        };
        debug_assert!(v.is_finite());
        Ok(v)
    }

    /// One prediction per real frame of the sequence.
    pub fn predict_sequence(&self, seq: &FeatureSequence) -> Result<Vec<f64>, ModelError> {
        self.check_dim(seq.rows.ncols())?;
        let out = match &self.params {
            FamilyModel::Lstm(m) => m.predict_sequence(seq),
            _ => {
                let mut out = Vec::with_capacity(seq.len);
                for l in 0..seq.len {
                    let row = seq.rows.row(l);
                    out.push(self.predict_row(row.as_slice().unwrap())?);
                }
                out
            }
        };
        debug_assert!(out.iter().all(|v| v.is_finite()));
        Ok(out)
    }
}

/// Serialized container; `format_version` is mandatory and checked on load.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: TrainedModel,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn save_model<W: std::io::Write>(model: &TrainedModel, writer: W) -> Result<(), ModelError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer(writer, &file).map_err(|e| ModelError::Serialization(e.to_string()))
}

pub fn load_model<R: std::io::Read>(reader: R) -> Result<TrainedModel, ModelError> {
    let file: ModelFile =
        serde_json::from_reader(reader).map_err(|e| ModelError::Serialization(e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Serialization(format!(
            "unsupported model format version {}",
            file.format_version
        )));
    }
    Ok(file.model)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::featurize::SequenceMeta;

    pub(crate) fn toy_sequence(id: &str, rows: Vec<Vec<f64>>, targets: Vec<f64>) -> FeatureSequence {
        let n = rows.len();
        let p = rows[0].len();
        let mut m = Array2::zeros((n, p));
        for (i, r) in rows.iter().enumerate() {
            m.row_mut(i).assign(&ndarray::ArrayView1::from(r.as_slice()));
        }
        FeatureSequence {
            meta: SequenceMeta {
                game_id: "g".into(),
                play_id: id.into(),
                week: 1,
                carrier_id: "rb".into(),
                frame_ids: (1..=n as u32).collect(),
                current_yardline: vec![50.0; n],
                end_yardline: 40.0,
            },
            rows: m,
            mask: vec![true; n],
            targets,
            len: n,
            truncated: false,
        }
    }

    #[test]
    fn intercept_round_trips_through_model_file() {
        let seqs = vec![toy_sequence(
            "a",
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]],
            vec![3.0, 5.0, 10.0],
        )];
        let cfg = ModelConfig::new(FamilyConfig::Intercept, 1);
        let model = fit(&cfg, &seqs, "hash").unwrap();
        assert_eq!(model.predict_row(&[0.0, 0.0]).unwrap(), 6.0);

        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let loaded = load_model(buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(
            loaded.predict_row(&[9.0, -2.0]).unwrap().to_bits(),
            model.predict_row(&[9.0, -2.0]).unwrap().to_bits()
        );
    }

    #[test]
    fn schema_mismatch_is_detected() {
        let seqs = vec![toy_sequence("a", vec![vec![0.0, 1.0]], vec![3.0])];
        let cfg = ModelConfig::new(FamilyConfig::Intercept, 1);
        let model = fit(&cfg, &seqs, "hash").unwrap();
        let err = model.predict_row(&[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, ModelError::SchemaMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let cfg = ModelConfig::new(FamilyConfig::Intercept, 1);
        let err = fit(&cfg, &[], "hash").unwrap_err();
        assert!(matches!(err, ModelError::EmptyTrainingSet));
    }
}
