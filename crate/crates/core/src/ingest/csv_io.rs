//! Tracking CSV parsing and serialization.
//!
//! One CSV row is one (play, frame, entity) tuple. Rows are grouped by
//! `(game_id, play_id)` and then by `frame_id`; row order inside a frame is
//! irrelevant. Malformed rows are skipped and counted; a play whose frame
//! loses a row this way fails the 11+11 completeness check and is dropped
//! with a reason in the report.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::field::{normalize_deg, DriveDirection, FRAME_DT};

use super::{
    validate_coords, Event, Exclusion, Frame, IngestError, Play, PlayType, PlayerId, PlayerState,
    TeamSide,
};

/// Column-name map from the canonical field names to whatever the stream
/// uses. Defaults match the schema this crate writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub game_id: String,
    pub play_id: String,
    pub week: String,
    pub frame_id: String,
    pub player_id: String,
    pub team_side: String,
    pub x: String,
    pub y: String,
    pub s: String,
    pub dis: String,
    pub dir: String,
    pub event: String,
    /// Optional columns; parsed when present.
    pub play_type: String,
    pub drive_direction: String,
    pub possession_team: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            game_id: "game_id".into(),
            play_id: "play_id".into(),
            week: "week".into(),
            frame_id: "frame_id".into(),
            player_id: "player_id".into(),
            team_side: "team_side".into(),
            x: "x".into(),
            y: "y".into(),
            s: "s".into(),
            dis: "dis".into(),
            dir: "dir".into(),
            event: "event".into(),
            play_type: "play_type".into(),
            drive_direction: "drive_direction".into(),
            possession_team: "possession_team".into(),
        }
    }
}

/// Parse-stage accounting, serialized as part of the JSON exclusion report.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_skipped: usize,
    pub row_skip_reasons: BTreeMap<String, usize>,
    pub plays_seen: usize,
    pub plays_kept: usize,
    pub dropped: Vec<Exclusion>,
    pub drop_counts: BTreeMap<String, usize>,
}

impl ParseReport {
    fn skip_row(&mut self, reason: &str) {
        self.rows_skipped += 1;
        *self.row_skip_reasons.entry(reason.to_string()).or_insert(0) += 1;
    }

    fn drop_play(&mut self, game_id: &str, play_id: &str, reason: &str) {
        *self.drop_counts.entry(reason.to_string()).or_insert(0) += 1;
        self.dropped.push(Exclusion {
            game_id: game_id.to_string(),
            play_id: play_id.to_string(),
            reason: reason.to_string(),
        });
    }
}

struct ColumnIndices {
    game_id: usize,
    play_id: usize,
    week: usize,
    frame_id: usize,
    player_id: usize,
    team_side: usize,
    x: usize,
    y: usize,
    s: usize,
    dis: usize,
    dir: usize,
    event: usize,
    play_type: Option<usize>,
    drive_direction: Option<usize>,
    possession_team: Option<usize>,
}

impl ColumnIndices {
    fn resolve(headers: &csv::StringRecord, schema: &CsvSchema) -> Result<Self, IngestError> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let require = |name: &str| {
            find(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        Ok(ColumnIndices {
            game_id: require(&schema.game_id)?,
            play_id: require(&schema.play_id)?,
            week: require(&schema.week)?,
            frame_id: require(&schema.frame_id)?,
            player_id: require(&schema.player_id)?,
            team_side: require(&schema.team_side)?,
            x: require(&schema.x)?,
            y: require(&schema.y)?,
            s: require(&schema.s)?,
            dis: require(&schema.dis)?,
            dir: require(&schema.dir)?,
            event: require(&schema.event)?,
            play_type: find(&schema.play_type),
            drive_direction: find(&schema.drive_direction),
            possession_team: find(&schema.possession_team),
        })
    }
}

struct RawRow {
    week: u32,
    frame_id: u32,
    event: Event,
    state: PlayerState,
    play_type: Option<PlayType>,
    drive_direction: Option<DriveDirection>,
    possession_team: Option<String>,
}

struct PlayAccumulator {
    game_id: String,
    play_id: String,
    week: u32,
    play_type: Option<PlayType>,
    drive_direction: Option<DriveDirection>,
    possession_team: Option<String>,
    // frame_id -> (events seen, rows)
    frames: BTreeMap<u32, (Vec<Event>, Vec<PlayerState>)>,
}

/// Parse a tracking CSV stream into validated plays.
///
/// Plays come back in first-appearance order. Validation drops a play (with
/// a reason) when any frame lacks exactly 11 offense and 11 defense rows, or
/// when no snap event exists anywhere in the play.
pub fn parse_tracking_csv<R: Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<(Vec<Play>, ParseReport), IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let cols = ColumnIndices::resolve(&headers, schema)?;

    let mut report = ParseReport::default();
    let mut order: Vec<(String, String)> = Vec::new();
    let mut accs: BTreeMap<(String, String), PlayAccumulator> = BTreeMap::new();

    for (row_no, record) in csv_reader.records().enumerate() {
        let line_no = row_no + 2; // header is line 1
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                report.skip_row(&format!("malformed_row_line_{line_no}"));
                continue;
            }
        };
        report.rows_read += 1;

        let game_id = record.get(cols.game_id).unwrap_or("").trim().to_string();
        let play_id = record.get(cols.play_id).unwrap_or("").trim().to_string();
        if game_id.is_empty() || play_id.is_empty() {
            report.skip_row("malformed_row");
            continue;
        }

        let raw = match parse_row(&record, &cols) {
            Ok(r) => r,
            Err(reason) => {
                report.skip_row(reason);
                continue;
            }
        };

        let key = (game_id.clone(), play_id.clone());
        let acc = accs.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            PlayAccumulator {
                game_id,
                play_id,
                week: raw.week,
                play_type: None,
                drive_direction: None,
                possession_team: None,
                frames: BTreeMap::new(),
            }
        });
        if acc.play_type.is_none() {
            acc.play_type = raw.play_type;
        }
        if acc.drive_direction.is_none() {
            acc.drive_direction = raw.drive_direction;
        }
        if acc.possession_team.is_none() {
            acc.possession_team = raw.possession_team;
        }
        let entry = acc
            .frames
            .entry(raw.frame_id)
            .or_insert_with(|| (Vec::new(), Vec::new()));
        if raw.event != Event::None {
            entry.0.push(raw.event);
        }
        entry.1.push(raw.state);
    }

    let mut plays = Vec::new();
    for key in order {
        let acc = accs.remove(&key).unwrap();
        report.plays_seen += 1;
        match finish_play(acc) {
            Ok(play) => {
                report.plays_kept += 1;
                plays.push(play);
            }
            Err((game_id, play_id, reason)) => {
                report.drop_play(&game_id, &play_id, reason);
            }
        }
    }

    Ok((plays, report))
}

fn parse_row(record: &csv::StringRecord, cols: &ColumnIndices) -> Result<RawRow, &'static str> {
    let get = |i: usize| record.get(i).unwrap_or("").trim();
    let week: u32 = get(cols.week).parse().map_err(|_| "malformed_week")?;
    let frame_id: u32 = get(cols.frame_id)
        .parse()
        .map_err(|_| "malformed_frame_id")?;
    let x: f64 = get(cols.x).parse().map_err(|_| "malformed_coordinate")?;
    let y: f64 = get(cols.y).parse().map_err(|_| "malformed_coordinate")?;
    let s: f64 = get(cols.s).parse().map_err(|_| "malformed_speed")?;
    let dis: f64 = get(cols.dis).parse().map_err(|_| "malformed_dis")?;
    let dir: f64 = get(cols.dir).parse().map_err(|_| "malformed_dir")?;
    if !x.is_finite() || !y.is_finite() || !validate_coords(x, y) {
        return Err("coordinate_out_of_range");
    }
    if !s.is_finite() || s < 0.0 || !dis.is_finite() || dis < 0.0 || !dir.is_finite() {
        return Err("malformed_kinematics");
    }
    let team_side =
        TeamSide::parse(get(cols.team_side)).ok_or("malformed_team_side")?;
    let player_id = get(cols.player_id);
    if player_id.is_empty() {
        return Err("missing_player_id");
    }

    Ok(RawRow {
        week,
        frame_id,
        event: Event::parse(get(cols.event)),
        state: PlayerState {
            player_id: PlayerId(player_id.to_string()),
            team_side,
            x,
            y,
            s,
            dis,
            dir: normalize_deg(dir),
        },
        play_type: cols.play_type.map(|i| PlayType::parse(get(i))),
        drive_direction: cols.drive_direction.and_then(|i| match get(i) {
            "toward_high_x" => Some(DriveDirection::TowardHighX),
            "toward_low_x" => Some(DriveDirection::TowardLowX),
            _ => None,
        }),
        possession_team: cols.possession_team.map(|i| get(i).to_string()),
    })
}

fn finish_play(acc: PlayAccumulator) -> Result<Play, (String, String, &'static str)> {
    let PlayAccumulator {
        game_id,
        play_id,
        week,
        play_type,
        drive_direction,
        possession_team,
        frames: raw_frames,
    } = acc;
    let fail = |reason| Err((game_id.clone(), play_id.clone(), reason));
    if raw_frames.is_empty() {
        return fail("no_frames");
    }
    let first_frame_id = *raw_frames.keys().next().unwrap();
    let mut frames = Vec::with_capacity(raw_frames.len());
    for (frame_id, (mut events, mut rows)) in raw_frames {
        let mut ball = None;
        rows.retain(|r| {
            if r.team_side == TeamSide::Ball {
                if ball.is_none() {
                    ball = Some(r.clone());
                }
                false
            } else {
                true
            }
        });
        let n_off = rows.iter().filter(|r| r.team_side == TeamSide::Offense).count();
        let n_def = rows.len() - n_off;
        if n_off != 11 || n_def != 11 {
            return fail("incomplete_frame");
        }
        rows.sort_by(|a, b| {
            let side = |t: TeamSide| matches!(t, TeamSide::Defense) as u8;
            side(a.team_side)
                .cmp(&side(b.team_side))
                .then_with(|| a.player_id.cmp(&b.player_id))
        });
        let mut seen = std::collections::HashSet::new();
        if !rows.iter().all(|r| seen.insert(r.player_id.clone())) {
            return fail("duplicate_player_in_frame");
        }
        Event::sort_canonical(&mut events);
        frames.push(Frame {
            frame_id,
            time_index: FRAME_DT * (frame_id - first_frame_id) as f64,
            events,
            players: rows,
            ball,
        });
    }

    if !frames.iter().any(|f| f.has_event(&Event::Snap)) {
        return fail("missing_snap");
    }

    let (drive_direction, inferred) = match drive_direction {
        Some(d) => (d, false),
        None => (infer_play_direction(&frames), true),
    };

    Ok(Play {
        game_id,
        play_id,
        week,
        possession_team: possession_team.unwrap_or_default(),
        drive_direction,
        drive_direction_inferred: inferred,
        play_type: play_type.unwrap_or(PlayType::Run),
        frames,
    })
}

/// Provisional direction from the offense's net x displacement; extraction
/// re-infers per sequence from the carrier.
fn infer_play_direction(frames: &[Frame]) -> DriveDirection {
    let centroid = |f: &Frame| {
        let (sum, n) = f
            .offense()
            .fold((0.0, 0usize), |(s, n), p| (s + p.x, n + 1));
        sum / n.max(1) as f64
    };
    let first = centroid(frames.first().unwrap());
    let last = centroid(frames.last().unwrap());
    if last >= first {
        DriveDirection::TowardHighX
    } else {
        DriveDirection::TowardLowX
    }
}

/// Canonical header this crate writes, in order.
pub(crate) const CSV_COLUMNS: [&str; 15] = [
    "game_id",
    "play_id",
    "week",
    "possession_team",
    "play_type",
    "drive_direction",
    "frame_id",
    "event",
    "player_id",
    "team_side",
    "x",
    "y",
    "s",
    "dis",
    "dir",
];

/// Serialize plays back to the canonical CSV schema.
///
/// Floats are written with the shortest representation that round-trips
/// exactly, so parse → write → parse is lossless. A frame's annotations are
/// spread over its first rows, one per row.
pub fn write_tracking_csv<W: Write>(plays: &[Play], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for play in plays {
        let direction = match play.drive_direction {
            DriveDirection::TowardHighX => "toward_high_x",
            DriveDirection::TowardLowX => "toward_low_x",
        };
        for frame in &play.frames {
            let entries = frame
                .players
                .iter()
                .chain(frame.ball.as_ref());
            for (i, p) in entries.enumerate() {
                let event = frame
                    .events
                    .get(i)
                    .map(|e| e.as_csv_str())
                    .unwrap_or("");
                w.write_record([
                    play.game_id.as_str(),
                    play.play_id.as_str(),
                    &play.week.to_string(),
                    play.possession_team.as_str(),
                    play.play_type.as_csv_str(),
                    direction,
                    &frame.frame_id.to_string(),
                    event,
                    p.player_id.as_str(),
                    p.team_side.as_csv_str(),
                    &p.x.to_string(),
                    &p.y.to_string(),
                    &p.s.to_string(),
                    &p.dis.to_string(),
                    &p.dir.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{self, GeneratorConfig};

    #[test]
    fn header_only_stream_yields_nothing() {
        let csv = CSV_COLUMNS.join(",") + "\n";
        let (plays, report) = parse_tracking_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert!(plays.is_empty());
        assert_eq!(report.rows_read, 0);
        assert_eq!(report.rows_skipped, 0);
    }

    #[test]
    fn missing_column_is_an_error() {
        let csv = "game_id,play_id\n";
        let err = parse_tracking_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "week"));
    }

    #[test]
    fn table_row_parses_to_player_state() {
        // Header plus a single row shaped like the example tracking data.
        let mut csv = CSV_COLUMNS.join(",") + "\n";
        csv.push_str("g1,p1,6,HOME,run,toward_low_x,24,handoff,Cordarrelle Patterson,offense,60.64,29.70,7.55,0.76,175.34\n");
        let (plays, report) = parse_tracking_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        // Frame is incomplete (one offense row), so the play is dropped, but
        // the row itself parsed cleanly.
        assert_eq!(report.rows_read, 1);
        assert_eq!(report.rows_skipped, 0);
        assert!(plays.is_empty());
        assert_eq!(report.drop_counts["incomplete_frame"], 1);
    }

    #[test]
    fn out_of_range_rows_are_rejected() {
        let mut csv = CSV_COLUMNS.join(",") + "\n";
        csv.push_str("g1,p1,1,HOME,run,toward_low_x,1,snap,P1,offense,130.0,20.0,1.0,0.1,90.0\n");
        let (_, report) = parse_tracking_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(report.row_skip_reasons["coordinate_out_of_range"], 1);
    }

    #[test]
    fn missing_snap_play_is_excluded_with_counter() {
        let cfg = GeneratorConfig {
            seed: 3,
            weeks: 1,
            plays_per_week: 1,
            ..GeneratorConfig::default()
        };
        let corpus = synthgen::generate_corpus(&cfg);
        let mut play = corpus.plays[0].clone();
        for f in &mut play.frames {
            f.events.retain(|e| *e != Event::Snap);
        }
        let mut buf = Vec::new();
        write_tracking_csv(&[play], &mut buf).unwrap();
        let (plays, report) = parse_tracking_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert!(plays.is_empty());
        assert_eq!(report.drop_counts["missing_snap"], 1);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let cfg = GeneratorConfig {
            seed: 5,
            weeks: 2,
            plays_per_week: 5,
            ..GeneratorConfig::default()
        };
        let corpus = synthgen::generate_corpus(&cfg);
        let mut buf = Vec::new();
        write_tracking_csv(&corpus.plays, &mut buf).unwrap();
        let (parsed, report) = parse_tracking_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(report.plays_kept, corpus.plays.len());
        assert_eq!(parsed, corpus.plays);

        // And a second write is byte-identical.
        let mut buf2 = Vec::new();
        write_tracking_csv(&parsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn row_order_within_frame_is_irrelevant() {
        let cfg = GeneratorConfig {
            seed: 9,
            weeks: 1,
            plays_per_week: 2,
            ..GeneratorConfig::default()
        };
        let corpus = synthgen::generate_corpus(&cfg);
        let mut buf = Vec::new();
        write_tracking_csv(&corpus.plays, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        // Reverse all data rows; grouping keys make this a within-frame
        // permutation plus a play/frame reordering the parser must undo.
        lines.reverse();
        let mut shuffled = String::from(header);
        shuffled.push('\n');
        for l in lines {
            shuffled.push_str(l);
            shuffled.push('\n');
        }
        let (a, _) = parse_tracking_csv(shuffled.as_bytes(), &CsvSchema::default()).unwrap();
        let mut b = corpus.plays.clone();
        // First-appearance order differs after the reversal; compare as sets
        // keyed by (game_id, play_id).
        let key = |p: &Play| (p.game_id.clone(), p.play_id.clone());
        let mut a = a;
        a.sort_by_key(key);
        b.sort_by_key(key);
        assert_eq!(a, b);
    }
}
