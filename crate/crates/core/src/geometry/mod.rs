//! Endzone-adjusted coordinates and ball-carrier-relative features.
//!
//! All transforms derive from the convention in [`crate::field`]. The
//! adjusted frame expresses positions as (yards from the target endzone,
//! yards left of field center when facing that endzone) and headings as
//! degrees left of straight-at-the-endzone.

pub mod voronoi;

pub use voronoi::{voronoi_cells, voronoi_features, VoronoiFeatures, VoronoiVariant};

use serde::{Deserialize, Serialize};

use crate::field::{wrap_deg_180, DriveDirection, FIELD_CENTER_Y, MAX_YARDS_FROM_ENDZONE};
use crate::ingest::PlayerState;

/// A player state in the endzone-adjusted frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustedState {
    /// Yards from the target endzone goal line, clamped to `[0, 110]`.
    pub x_adj: f64,
    /// Yards from field center; positive is the left side when facing the
    /// target endzone.
    pub y_adj: f64,
    /// Heading in degrees in `[-180, 180]`; 0 points at the endzone,
    /// positive is left.
    pub dir_adj: f64,
}

/// Deterministic affine/angular transform into the adjusted frame.
pub fn adjust_state(p: &PlayerState, drive: DriveDirection) -> AdjustedState {
    AdjustedState {
        x_adj: adjust_x(p.x, drive),
        y_adj: adjust_y(p.y, drive),
        dir_adj: adjust_dir(p.dir, drive),
    }
}

pub fn adjust_x(x: f64, drive: DriveDirection) -> f64 {
    let raw = match drive {
        DriveDirection::TowardHighX => drive.goal_line_x() - x,
        DriveDirection::TowardLowX => x - drive.goal_line_x(),
    };
    raw.clamp(0.0, MAX_YARDS_FROM_ENDZONE)
}

pub fn adjust_y(y: f64, drive: DriveDirection) -> f64 {
    match drive {
        DriveDirection::TowardHighX => y - FIELD_CENTER_Y,
        DriveDirection::TowardLowX => FIELD_CENTER_Y - y,
    }
}

pub fn adjust_dir(dir: f64, drive: DriveDirection) -> f64 {
    wrap_deg_180(drive.target_heading_deg() - dir)
}

/// A player's position and direction relative to the ball-carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeState {
    /// `bc_x_adj - player_x_adj`; positive means the player is closer to the
    /// endzone than the carrier.
    pub x_change: f64,
    /// `player_y_adj - bc_y_adj`; positive means the player is left of the
    /// carrier when facing the endzone.
    pub y_change: f64,
    /// Euclidean distance to the carrier in the adjusted frame.
    pub dist_to_ball: f64,
    /// Minimal absolute difference, in `[0, 180]`, between the player's
    /// heading and the bearing of the segment from the player to the
    /// carrier. Zero and flagged when the two coincide.
    pub dir_wrt_bc_diff: f64,
    /// Set when player and carrier coincide and the angle is undefined.
    pub degenerate_distance: bool,
}

/// Relative features of `p` with respect to the carrier, both already in the
/// adjusted frame of the same play.
pub fn relative_state(p: &AdjustedState, carrier: &AdjustedState) -> RelativeState {
    let x_change = carrier.x_adj - p.x_adj;
    let y_change = p.y_adj - carrier.y_adj;
    let dist_to_ball = (x_change * x_change + y_change * y_change).sqrt();
    if dist_to_ball == 0.0 {
        return RelativeState {
            x_change,
            y_change,
            dist_to_ball,
            dir_wrt_bc_diff: 0.0,
            degenerate_distance: true,
        };
    }
    // Bearing from the player to the carrier in the adjusted frame: forward
    // is toward the endzone (decreasing x_adj), left is increasing y_adj.
    let forward = p.x_adj - carrier.x_adj;
    let left = carrier.y_adj - p.y_adj;
    let bearing = left.atan2(forward).to_degrees();
    let dir_wrt_bc_diff = wrap_deg_180(p.dir_adj - bearing).abs();
    RelativeState {
        x_change,
        y_change,
        dist_to_ball,
        dir_wrt_bc_diff,
        degenerate_distance: false,
    }
}
