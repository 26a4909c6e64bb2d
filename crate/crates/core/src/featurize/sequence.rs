//! Padded, masked sequences for the recurrent model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ingest::PlayerId;

use super::{apply_standardizer, StandardizationStats};

/// Identifying and positional context a sequence keeps for reports and
/// valuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub game_id: String,
    pub play_id: String,
    pub week: u32,
    pub carrier_id: PlayerId,
    pub frame_ids: Vec<u32>,
    /// Carrier yards from the target endzone at each frame.
    pub current_yardline: Vec<f64>,
    pub end_yardline: f64,
}

impl SequenceMeta {
    pub fn sequence_id(&self) -> String {
        format!("{}:{}", self.game_id, self.play_id)
    }
}

/// Unstandardized feature rows and per-frame targets for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRows {
    pub meta: SequenceMeta,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl SequenceRows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One standardized, zero-padded sequence with its mask and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub meta: SequenceMeta,
    /// `l_max × p` standardized rows; padded rows are exactly zero.
    pub rows: Array2<f64>,
    /// Exactly `len` leading true entries.
    pub mask: Vec<bool>,
    /// Per-frame targets, zero beyond `len`.
    pub targets: Vec<f64>,
    pub len: usize,
    /// Head frames were cut because the sequence exceeded `l_max`.
    pub truncated: bool,
}

impl FeatureSequence {
    pub fn l_max(&self) -> usize {
        self.rows.nrows()
    }
}

/// Standardize, pad to `l_max`, and mask each sequence.
///
/// A sequence longer than `l_max` keeps its most recent `l_max` frames (the
/// oldest are truncated) and is flagged; `meta` is trimmed to match.
pub fn build_sequences(
    sequences: &[SequenceRows],
    stats: &StandardizationStats,
    l_max: usize,
) -> Vec<FeatureSequence> {
    let p = stats.output_dim();
    sequences
        .iter()
        .map(|seq| {
            let total = seq.len();
            let (offset, len, truncated) = if total > l_max {
                (total - l_max, l_max, true)
            } else {
                (0, total, false)
            };
            let mut rows = Array2::zeros((l_max, p));
            for (l, row) in seq.rows[offset..].iter().enumerate() {
                let std = apply_standardizer(row, stats);
                rows.row_mut(l).assign(&ndarray::ArrayView1::from(&std));
            }
            let mut mask = vec![false; l_max];
            mask[..len].fill(true);
            let mut targets = vec![0.0; l_max];
            targets[..len].copy_from_slice(&seq.targets[offset..]);
            let meta = if truncated {
                SequenceMeta {
                    frame_ids: seq.meta.frame_ids[offset..].to_vec(),
                    current_yardline: seq.meta.current_yardline[offset..].to_vec(),
                    ..seq.meta.clone()
                }
            } else {
                seq.meta.clone()
            };
            FeatureSequence {
                meta,
                rows,
                mask,
                targets,
                len,
                truncated,
            }
        })
        .collect()
}
