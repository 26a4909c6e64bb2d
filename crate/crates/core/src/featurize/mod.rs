//! Per-frame feature assembly, standardization, and padded sequences.
//!
//! A feature row holds the ball-carrier block, ten offense and eleven
//! defense slots ordered by Euclidean distance to the carrier, and nine
//! Voronoi features — 193 columns in a fixed order, versioned by a schema
//! hash. The `Absolute` schema variant replaces the signed y/direction
//! columns with absolute values for the linear model.

mod schema;
mod sequence;
mod standardize;

pub use schema::{FeatureSchema, SchemaVariant, COLUMN_COUNT};
pub use sequence::{build_sequences, FeatureSequence, SequenceMeta, SequenceRows};
pub use standardize::{apply_standardizer, fit_standardizer, invert_standardizer, StandardizationStats};

use thiserror::Error;

use crate::field::DriveDirection;
use crate::geometry::{
    adjust_state, relative_state, voronoi_features, AdjustedState, RelativeState, VoronoiVariant,
};
use crate::ingest::{BallCarrierSequence, Frame, PlayerId};

#[derive(Debug, Error)]
pub enum FeaturizeError {
    #[error("frame {frame_id} incomplete: {reason}")]
    IncompleteFrame { frame_id: u32, reason: String },
    #[error("need at least 2 rows to fit a standardizer, got {0}")]
    TooFewRows(usize),
    #[error("schema hash mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },
}

/// Data-quality flags raised while building one row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowFlags {
    /// Some player coincided with the carrier; their pursuit angle was
    /// emitted as 0.
    pub degenerate_distance: bool,
    /// Coincident Voronoi generators were perturbed.
    pub voronoi_perturbed: bool,
}

/// One assembled feature row in schema order, plus quality flags.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub flags: RowFlags,
}

struct SlotEntry<'a> {
    adj: AdjustedState,
    rel: RelativeState,
    s: f64,
    dis: f64,
    id: &'a PlayerId,
}

/// Assemble the full 193-column row for one frame.
///
/// Slot `k` is the k-th closest teammate/defender by Euclidean distance to
/// the carrier, ties broken by player id, so the output is independent of
/// the frame's row order.
pub fn build_feature_row(
    frame: &Frame,
    carrier_id: &PlayerId,
    drive: DriveDirection,
) -> Result<FeatureRow, FeaturizeError> {
    let incomplete = |reason: &str| FeaturizeError::IncompleteFrame {
        frame_id: frame.frame_id,
        reason: reason.to_string(),
    };
    let carrier = frame
        .player(carrier_id)
        .ok_or_else(|| incomplete("carrier missing"))?;
    let carrier_adj = adjust_state(carrier, drive);

    let mut flags = RowFlags::default();
    let mut offense: Vec<SlotEntry> = Vec::with_capacity(10);
    let mut defense: Vec<SlotEntry> = Vec::with_capacity(11);
    for p in &frame.players {
        if &p.player_id == carrier_id {
            continue;
        }
        let adj = adjust_state(p, drive);
        let rel = relative_state(&adj, &carrier_adj);
        if rel.degenerate_distance {
            flags.degenerate_distance = true;
        }
        let entry = SlotEntry {
            adj,
            rel,
            s: p.s,
            dis: p.dis,
            id: &p.player_id,
        };
        match p.team_side {
            crate::ingest::TeamSide::Offense => offense.push(entry),
            crate::ingest::TeamSide::Defense => defense.push(entry),
            crate::ingest::TeamSide::Ball => {}
        }
    }
    if offense.len() != 10 || defense.len() != 11 {
        return Err(incomplete(&format!(
            "expected 10 offense + 11 defense around the carrier, got {}+{}",
            offense.len(),
            defense.len()
        )));
    }
    let by_distance = |a: &SlotEntry, b: &SlotEntry| {
        a.rel
            .dist_to_ball
            .partial_cmp(&b.rel.dist_to_ball)
            .unwrap()
            .then_with(|| a.id.cmp(b.id))
    };
    offense.sort_by(by_distance);
    defense.sort_by(by_distance);

    let vor_all = voronoi_features(frame, carrier_id, VoronoiVariant::AllPlayers, drive)
        .map_err(|e| incomplete(&e.to_string()))?;
    let vor_bc = voronoi_features(frame, carrier_id, VoronoiVariant::BcAndDefense, drive)
        .map_err(|e| incomplete(&e.to_string()))?;
    flags.voronoi_perturbed = vor_all.perturbed || vor_bc.perturbed;

    let mut values = Vec::with_capacity(COLUMN_COUNT);
    values.extend_from_slice(&[
        carrier_adj.x_adj,
        carrier_adj.y_adj,
        carrier_adj.dir_adj,
        carrier.s,
        carrier.dis,
    ]);
    for e in &offense {
        values.extend_from_slice(&[
            e.adj.x_adj,
            e.adj.y_adj,
            e.adj.dir_adj,
            e.s,
            e.dis,
            e.rel.x_change,
            e.rel.y_change,
            e.rel.dist_to_ball,
        ]);
    }
    for e in &defense {
        values.extend_from_slice(&[
            e.adj.x_adj,
            e.adj.y_adj,
            e.adj.dir_adj,
            e.s,
            e.dis,
            e.rel.x_change,
            e.rel.y_change,
            e.rel.dist_to_ball,
            e.rel.dir_wrt_bc_diff,
        ]);
    }
    values.extend_from_slice(&[
        vor_all.close_adj,
        vor_all.far_adj,
        vor_all.area,
        vor_all.area_in_front,
        if vor_all.bubble == Some(true) { 1.0 } else { 0.0 },
        vor_bc.close_adj,
        vor_bc.far_adj,
        vor_bc.area,
        vor_bc.area_in_front,
    ]);
    debug_assert_eq!(values.len(), COLUMN_COUNT);
    Ok(FeatureRow { values, flags })
}

/// Unstandardized rows and targets for every frame of each sequence, in
/// sequence order. Sequences with an unresolvable frame are dropped and
/// reported by id.
pub fn extract_sequence_rows(
    sequences: &[BallCarrierSequence],
    schema: &FeatureSchema,
) -> (Vec<SequenceRows>, Vec<String>) {
    use rayon::prelude::*;
    let results: Vec<Result<SequenceRows, String>> = sequences
        .par_iter()
        .map(|seq| {
            let mut rows = Vec::with_capacity(seq.len());
            for frame in &seq.frames {
                match build_feature_row(frame, &seq.carrier_id, seq.play.drive_direction) {
                    Ok(row) => rows.push(schema.transform(row.values)),
                    Err(e) => return Err(format!("{}: {e}", seq.sequence_id())),
                }
            }
            let current_yardline: Vec<f64> =
                (0..seq.len()).map(|l| seq.carrier_yardline(l)).collect();
            Ok(SequenceRows {
                meta: SequenceMeta {
                    game_id: seq.play.game_id.clone(),
                    play_id: seq.play.play_id.clone(),
                    week: seq.play.week,
                    carrier_id: seq.carrier_id.clone(),
                    frame_ids: seq.frames.iter().map(|f| f.frame_id).collect(),
                    current_yardline,
                    end_yardline: seq.end_yardline,
                },
                rows,
                targets: seq.labels.clone(),
            })
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(s) => out.push(s),
            Err(id) => dropped.push(id),
        }
    }
    (out, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{PlayerState, TeamSide};

    fn player(id: &str, side: TeamSide, x: f64, y: f64, s: f64) -> PlayerState {
        PlayerState {
            player_id: id.into(),
            team_side: side,
            x,
            y,
            s,
            dis: s * 0.1,
            dir: 90.0,
        }
    }

    fn full_frame(positions: &[(f64, f64)]) -> Frame {
        // positions[0] is the carrier; next 10 offense; next 11 defense.
        assert_eq!(positions.len(), 22);
        let mut players = Vec::new();
        players.push(player("rb00", TeamSide::Offense, positions[0].0, positions[0].1, 5.0));
        for i in 0..10 {
            let p = positions[1 + i];
            players.push(player(&format!("ol{i:02}"), TeamSide::Offense, p.0, p.1, 2.0));
        }
        for i in 0..11 {
            let p = positions[11 + i];
            players.push(player(&format!("db{i:02}"), TeamSide::Defense, p.0, p.1, 3.0));
        }
        Frame {
            frame_id: 1,
            time_index: 0.0,
            events: vec![],
            players,
            ball: None,
        }
    }

    fn spread_positions() -> Vec<(f64, f64)> {
        let mut v = vec![(60.0, 26.0)];
        for i in 0..10 {
            v.push((55.0 - i as f64 * 2.0, 10.0 + i as f64 * 3.0));
        }
        for i in 0..11 {
            v.push((40.0 - i as f64 * 1.5, 8.0 + i as f64 * 3.5));
        }
        v
    }

    #[test]
    fn row_has_full_column_count() {
        let frame = full_frame(&spread_positions());
        let row = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        assert_eq!(row.values.len(), COLUMN_COUNT);
        assert_eq!(COLUMN_COUNT, 193);
    }

    #[test]
    fn defense_slots_are_distance_ordered() {
        let schema = FeatureSchema::new(SchemaVariant::Signed);
        let mut positions = spread_positions();
        // Defenders at exactly 2 and 5 yards.
        positions[11] = (58.0, 26.0);
        positions[12] = (55.0, 26.0);
        let frame = full_frame(&positions);
        let row = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        let idx1 = schema.column_index("defense1_dist_to_ball").unwrap();
        let idx2 = schema.column_index("defense2_dist_to_ball").unwrap();
        assert_eq!(row.values[idx1], 2.0);
        assert_eq!(row.values[idx2], 5.0);
        // Reversing the frame's row order changes nothing.
        let mut frame2 = frame.clone();
        frame2.players.reverse();
        let row2 = build_feature_row(&frame2, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        assert_eq!(row.values, row2.values);

        // Monotone distances across all slots.
        for k in 1..11 {
            let a = schema.column_index(&format!("defense{k}_dist_to_ball")).unwrap();
            let b = schema
                .column_index(&format!("defense{}_dist_to_ball", k + 1))
                .unwrap();
            assert!(row.values[a] <= row.values[b]);
        }
    }

    #[test]
    fn equidistant_players_tie_break_by_id() {
        // All 21 non-carriers on a circle of radius 10 around the carrier.
        let n = 21;
        let mut positions = vec![(60.0, 26.0)];
        for i in 0..n {
            let ang = i as f64 * std::f64::consts::TAU / n as f64;
            positions.push((60.0 + 10.0 * ang.cos(), 26.0 + 10.0 * ang.sin()));
        }
        let frame = full_frame(&positions);
        let row1 = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        let mut frame2 = frame.clone();
        frame2.players.reverse();
        let row2 = build_feature_row(&frame2, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        assert_eq!(row1.values, row2.values);
    }

    #[test]
    fn relative_columns_match_direct_recomputation() {
        use rand::{Rng, SeedableRng};
        let schema = FeatureSchema::new(SchemaVariant::Signed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let positions: Vec<(f64, f64)> = (0..22)
                .map(|_| (rng.gen_range(15.0..105.0), rng.gen_range(2.0..51.0)))
                .collect();
            let frame = full_frame(&positions);
            let row =
                build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
            let carrier = positions[0];
            for k in 1..=11 {
                let dist = row.values
                    [schema.column_index(&format!("defense{k}_dist_to_ball")).unwrap()];
                let xc =
                    row.values[schema.column_index(&format!("defense{k}_x_change")).unwrap()];
                let yc =
                    row.values[schema.column_index(&format!("defense{k}_y_change")).unwrap()];
                // Find the defender whose raw distance matches; verify the
                // change columns against raw coordinates.
                let m = positions[11..]
                    .iter()
                    .map(|p| {
                        (((p.0 - carrier.0).powi(2) + (p.1 - carrier.1).powi(2)).sqrt(), *p)
                    })
                    .filter(|(d, _)| (d - dist).abs() < 1e-9)
                    .count();
                assert!(m >= 1);
                assert!((dist * dist - (xc * xc + yc * yc)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn absolute_variant_rewrites_signed_columns() {
        let signed = FeatureSchema::new(SchemaVariant::Signed);
        let abs = FeatureSchema::new(SchemaVariant::Absolute);
        assert_ne!(signed.hash, abs.hash);
        let frame = full_frame(&spread_positions());
        let row = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        let transformed = abs.transform(row.values.clone());
        let idx = signed.column_index("bc_y_adj").unwrap();
        assert_eq!(transformed[idx], row.values[idx].abs());
        // Untransformed columns pass through.
        let s_idx = signed.column_index("bc_s").unwrap();
        assert_eq!(transformed[s_idx], row.values[s_idx]);
        // Signed variant is the identity.
        assert_eq!(signed.transform(row.values.clone()), row.values);
    }

    #[test]
    fn rows_are_bitwise_deterministic() {
        let frame = full_frame(&spread_positions());
        let a = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        let b = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.values), bits(&b.values));
    }

    #[test]
    fn incomplete_frame_is_rejected() {
        let mut frame = full_frame(&spread_positions());
        frame.players.pop();
        let err = build_feature_row(&frame, &"rb00".into(), DriveDirection::TowardLowX)
            .unwrap_err();
        assert!(matches!(err, FeaturizeError::IncompleteFrame { .. }));
    }
}
