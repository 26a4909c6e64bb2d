//! Tracking-data ingestion: typed plays, validation, and ball-carrier
//! sequence extraction.
//!
//! A [`Play`] is a validated, ordered collection of 10 Hz [`Frame`]s, each
//! holding exactly eleven offense and eleven defense [`PlayerState`]s plus an
//! optional ball entry. [`extract_ball_carrier_sequences`] identifies the
//! carry window of each run play (handoff/lateral/direct snap through
//! tackle/out-of-bounds/fumble/touchdown) and computes the per-frame
//! yards-remaining labels used everywhere downstream.

mod csv_io;

pub use csv_io::{parse_tracking_csv, write_tracking_csv, CsvSchema, ParseReport};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{self, DriveDirection};
use crate::geometry;

/// Opaque player identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for PlayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamSide {
    Offense,
    Defense,
    Ball,
}

impl TeamSide {
    fn parse(s: &str) -> Option<TeamSide> {
        match s.trim() {
            "offense" => Some(TeamSide::Offense),
            "defense" => Some(TeamSide::Defense),
            "ball" => Some(TeamSide::Ball),
            _ => None,
        }
    }

    pub fn as_csv_str(self) -> &'static str {
        match self {
            TeamSide::Offense => "offense",
            TeamSide::Defense => "defense",
            TeamSide::Ball => "ball",
        }
    }
}

/// Event annotation attached to a frame.
///
/// Annotations outside the vocabulary below map to `Other` and never drive
/// control flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    None,
    Snap,
    Handoff,
    Lateral,
    DirectSnap,
    PassForward,
    FirstContact,
    Tackle,
    OutOfBounds,
    Fumble,
    Touchdown,
    Other(String),
}

impl Event {
    pub fn parse(s: &str) -> Event {
        match s.trim() {
            "" | "NA" | "na" | "none" | "None" => Event::None,
            "snap" | "ball_snap" => Event::Snap,
            "handoff" => Event::Handoff,
            "lateral" => Event::Lateral,
            "direct_snap" => Event::DirectSnap,
            "pass_forward" => Event::PassForward,
            "first_contact" => Event::FirstContact,
            "tackle" => Event::Tackle,
            "out_of_bounds" => Event::OutOfBounds,
            "fumble" => Event::Fumble,
            "touchdown" => Event::Touchdown,
            other => Event::Other(other.to_string()),
        }
    }

    pub fn as_csv_str(&self) -> &str {
        match self {
            Event::None => "",
            Event::Snap => "snap",
            Event::Handoff => "handoff",
            Event::Lateral => "lateral",
            Event::DirectSnap => "direct_snap",
            Event::PassForward => "pass_forward",
            Event::FirstContact => "first_contact",
            Event::Tackle => "tackle",
            Event::OutOfBounds => "out_of_bounds",
            Event::Fumble => "fumble",
            Event::Touchdown => "touchdown",
            Event::Other(s) => s,
        }
    }

    /// Carry-start events: the runner received the ball.
    pub fn starts_carry(&self) -> bool {
        matches!(self, Event::Handoff | Event::Lateral | Event::DirectSnap)
    }

    /// Carry-end events: the ball became dead or changed hands.
    pub fn ends_carry(&self) -> bool {
        matches!(
            self,
            Event::Tackle | Event::OutOfBounds | Event::Fumble | Event::Touchdown
        )
    }

    /// Listing-order priority for resolving simultaneous annotations on one
    /// frame: carry starts before carry ends, both in vocabulary order.
    fn priority(&self) -> u8 {
        match self {
            Event::Snap => 0,
            Event::Handoff => 1,
            Event::Lateral => 2,
            Event::DirectSnap => 3,
            Event::PassForward => 4,
            Event::FirstContact => 5,
            Event::Tackle => 6,
            Event::OutOfBounds => 7,
            Event::Fumble => 8,
            Event::Touchdown => 9,
            Event::Other(_) => 10,
            Event::None => 11,
        }
    }

    /// Sort distinct frame annotations into canonical priority order.
    pub(crate) fn sort_canonical(events: &mut Vec<Event>) {
        events.sort_by(|a, b| {
            a.priority()
                .cmp(&b.priority())
                .then_with(|| a.as_csv_str().cmp(b.as_csv_str()))
        });
        events.dedup();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayType {
    Run,
    Dropback,
    Other,
}

impl PlayType {
    fn parse(s: &str) -> PlayType {
        match s.trim() {
            "run" => PlayType::Run,
            "dropback" | "pass" => PlayType::Dropback,
            _ => PlayType::Other,
        }
    }

    pub fn as_csv_str(self) -> &'static str {
        match self {
            PlayType::Run => "run",
            PlayType::Dropback => "dropback",
            PlayType::Other => "other",
        }
    }
}

/// One player's (or the ball's) state at a single frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub player_id: PlayerId,
    pub team_side: TeamSide,
    /// Yards along the field, `[0, 120]`.
    pub x: f64,
    /// Yards across the field, `[0, 53.3]`.
    pub y: f64,
    /// Speed, yards/second.
    pub s: f64,
    /// Distance traveled since the previous frame, yards.
    pub dis: f64,
    /// Heading in degrees, `[0, 360)`, clockwise from `+y`.
    pub dir: f64,
}

/// One 10 Hz snapshot of the 22 on-field players plus an optional ball entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: u32,
    /// Seconds since the first frame of the play.
    pub time_index: f64,
    /// Distinct annotations observed on this frame's rows, in listing-order
    /// priority. Usually empty or a single entry; a frame can legitimately
    /// carry both a carry-start and a carry-end annotation.
    pub events: Vec<Event>,
    /// Exactly 11 offense then 11 defense entries, each group sorted by
    /// player id for a canonical order.
    pub players: Vec<PlayerState>,
    pub ball: Option<PlayerState>,
}

impl Frame {
    /// The frame's resolved annotation: the first in listing-order priority.
    pub fn event(&self) -> Event {
        self.events.first().cloned().unwrap_or(Event::None)
    }

    pub fn has_event(&self, ev: &Event) -> bool {
        self.events.contains(ev)
    }

    pub fn starts_carry(&self) -> bool {
        self.events.iter().any(|e| e.starts_carry())
    }

    pub fn ends_carry(&self) -> bool {
        self.events.iter().any(|e| e.ends_carry())
    }

    pub fn offense(&self) -> impl Iterator<Item = &PlayerState> {
        self.players
            .iter()
            .filter(|p| p.team_side == TeamSide::Offense)
    }

    pub fn defense(&self) -> impl Iterator<Item = &PlayerState> {
        self.players
            .iter()
            .filter(|p| p.team_side == TeamSide::Defense)
    }

    pub fn player(&self, id: &PlayerId) -> Option<&PlayerState> {
        self.players.iter().find(|p| &p.player_id == id)
    }
}

/// A validated play: ordered frames, a snap event, known play type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Play {
    pub game_id: String,
    pub play_id: String,
    pub week: u32,
    pub possession_team: String,
    pub drive_direction: DriveDirection,
    /// True when the drive direction was inferred from player movement
    /// rather than supplied as a column; extraction re-infers it from the
    /// carrier's net displacement in that case.
    pub drive_direction_inferred: bool,
    pub play_type: PlayType,
    pub frames: Vec<Frame>,
}

/// Identifying context a sequence keeps from its play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayRef {
    pub game_id: String,
    pub play_id: String,
    pub week: u32,
    pub possession_team: String,
    pub drive_direction: DriveDirection,
}

/// An ordered frame window from carry start to carry end with per-frame
/// yards-remaining labels.
///
/// `labels[l]` is `Y(l)`: yards gained from the carrier's position at frame
/// `l` to the end of the play (signed; negative if the carrier ends up
/// farther from the endzone). `end_yardline` is `Y*`: the carrier's yards
/// from the target endzone when the play ends, constant across the sequence,
/// so `Y*(l) = x_adj(l) - Y(l)` holds at every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCarrierSequence {
    pub play: PlayRef,
    pub carrier_id: PlayerId,
    pub start_frame: u32,
    pub end_frame: u32,
    /// The frames of the carry window, in order.
    pub frames: Vec<Frame>,
    /// Per-frame yards gained from the current position to play end.
    pub labels: Vec<f64>,
    /// Yards from the target endzone at play end, in `[0, 110]`.
    pub end_yardline: f64,
}

impl BallCarrierSequence {
    /// Number of frames `L` in the carry.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The carrier's yards from the target endzone at frame `l`.
    pub fn carrier_yardline(&self, l: usize) -> f64 {
        self.end_yardline + self.labels[l]
    }

    /// A stable identifier for leakage checks and logs.
    pub fn sequence_id(&self) -> String {
        format!("{}:{}", self.play.game_id, self.play.play_id)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("CSV read error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Why a play or sequence was excluded, for the JSON exclusion report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub game_id: String,
    pub play_id: String,
    pub reason: String,
}

/// Carry-extraction accounting; serialized alongside the parse report as
/// part of the JSON exclusion report.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub plays_seen: usize,
    pub sequences_extracted: usize,
    pub dropped: Vec<Exclusion>,
    pub drop_counts: BTreeMap<String, usize>,
}

impl ExtractionReport {
    fn drop_play(&mut self, play: &Play, reason: &str) {
        *self.drop_counts.entry(reason.to_string()).or_insert(0) += 1;
        self.dropped.push(Exclusion {
            game_id: play.game_id.clone(),
            play_id: play.play_id.clone(),
            reason: reason.to_string(),
        });
    }
}

/// Identify one ball-carrier sequence per run play.
///
/// The carry starts at the first handoff/lateral/direct-snap event and ends
/// at the first tackle/out-of-bounds/fumble/touchdown event at or after it
/// (the same frame may carry both, giving a length-1 sequence). Plays
/// missing either event, and non-run plays, are dropped silently but counted
/// in the report. The carrier is the offense player nearest the ball at the
/// carry-start frame, ties broken by player id.
pub fn extract_ball_carrier_sequences(
    plays: &[Play],
) -> (Vec<BallCarrierSequence>, ExtractionReport) {
    let mut report = ExtractionReport::default();
    let mut sequences = Vec::new();

    for play in plays {
        report.plays_seen += 1;
        if play.play_type != PlayType::Run {
            report.drop_play(play, "not_a_run_play");
            continue;
        }
        let Some(start_idx) = play.frames.iter().position(|f| f.starts_carry()) else {
            report.drop_play(play, "missing_carry_start_event");
            continue;
        };
        let Some(end_idx) = play.frames[start_idx..]
            .iter()
            .position(|f| f.ends_carry())
            .map(|i| i + start_idx)
        else {
            report.drop_play(play, "missing_carry_end_event");
            continue;
        };

        let Some(carrier_id) = identify_carrier(&play.frames[start_idx]) else {
            report.drop_play(play, "carrier_unresolved");
            continue;
        };

        let frames: Vec<Frame> = play.frames[start_idx..=end_idx].to_vec();
        if frames.iter().any(|f| f.player(&carrier_id).is_none()) {
            report.drop_play(play, "carrier_missing_from_frame");
            continue;
        }

        let drive = if play.drive_direction_inferred {
            infer_drive_direction(&frames, &carrier_id).unwrap_or(play.drive_direction)
        } else {
            play.drive_direction
        };

        let x_adj: Vec<f64> = frames
            .iter()
            .map(|f| geometry::adjust_state(f.player(&carrier_id).unwrap(), drive).x_adj)
            .collect();
        let end_yardline = *x_adj.last().unwrap();
        let labels: Vec<f64> = x_adj.iter().map(|x| x - end_yardline).collect();

        sequences.push(BallCarrierSequence {
            play: PlayRef {
                game_id: play.game_id.clone(),
                play_id: play.play_id.clone(),
                week: play.week,
                possession_team: play.possession_team.clone(),
                drive_direction: drive,
            },
            carrier_id,
            start_frame: frames.first().unwrap().frame_id,
            end_frame: frames.last().unwrap().frame_id,
            frames,
            labels,
            end_yardline,
        });
        report.sequences_extracted += 1;
    }

    (sequences, report)
}

/// Offense player nearest the ball at the carry-start frame.
fn identify_carrier(frame: &Frame) -> Option<PlayerId> {
    let ball = frame.ball.as_ref()?;
    frame
        .offense()
        .map(|p| {
            let d2 = (p.x - ball.x).powi(2) + (p.y - ball.y).powi(2);
            (d2, &p.player_id)
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)))
        .map(|(_, id)| id.clone())
}

/// Net x displacement of the carrier over the carry decides the direction.
fn infer_drive_direction(frames: &[Frame], carrier_id: &PlayerId) -> Option<DriveDirection> {
    let first = frames.first()?.player(carrier_id)?;
    let last = frames.last()?.player(carrier_id)?;
    let dx = last.x - first.x;
    if dx == 0.0 {
        None
    } else if dx > 0.0 {
        Some(DriveDirection::TowardHighX)
    } else {
        Some(DriveDirection::TowardLowX)
    }
}

pub(crate) fn validate_coords(x: f64, y: f64) -> bool {
    (0.0..=field::FIELD_LENGTH).contains(&x) && (0.0..=field::FIELD_WIDTH).contains(&y)
}
