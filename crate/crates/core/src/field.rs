//! Field geometry constants and the coordinate convention.
//!
//! Every geometric computation in this crate derives from the convention
//! fixed here:
//!
//! * `x` runs the length of the field, `x ∈ [0, 120]` yards, with the two
//!   endzones occupying `[0, 10]` and `[110, 120]`. The goal lines are at
//!   `x = 10` and `x = 110`.
//! * `y` runs across the field, `y ∈ [0, 53.3]` yards, with the field center
//!   at `y = 26.65`.
//! * `dir` is a heading in degrees, measured clockwise from the `+y` axis:
//!   `0°` points toward `+y`, `90°` toward `+x`, `180°` toward `-y`, and
//!   `270°` toward `-x`. Raw headings are normalized to `[0, 360)`.
//!
//! A play drives toward one endzone; all adjusted features are expressed
//! relative to that target endzone (see [`crate::geometry`]).

use serde::{Deserialize, Serialize};

/// Full field length in yards, endzones included.
pub const FIELD_LENGTH: f64 = 120.0;
/// Field width in yards.
pub const FIELD_WIDTH: f64 = 53.3;
/// Half the field width; `y` distance of the field center from either sideline.
pub const FIELD_CENTER_Y: f64 = FIELD_WIDTH / 2.0;
/// Goal line of the low-`x` endzone.
pub const GOAL_LINE_LOW_X: f64 = 10.0;
/// Goal line of the high-`x` endzone.
pub const GOAL_LINE_HIGH_X: f64 = 110.0;
/// Playing-field distance between the goal lines plus one endzone depth:
/// the maximum meaningful "yards from target endzone" value.
pub const MAX_YARDS_FROM_ENDZONE: f64 = 110.0;
/// Seconds between consecutive tracking frames (10 Hz).
pub const FRAME_DT: f64 = 0.1;

/// Which endzone the possession team is driving toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveDirection {
    TowardHighX,
    TowardLowX,
}

impl DriveDirection {
    /// Raw `x` of the target goal line.
    pub fn goal_line_x(self) -> f64 {
        match self {
            DriveDirection::TowardHighX => GOAL_LINE_HIGH_X,
            DriveDirection::TowardLowX => GOAL_LINE_LOW_X,
        }
    }

    /// Raw heading (degrees clockwise from `+y`) that points straight at the
    /// target endzone.
    pub fn target_heading_deg(self) -> f64 {
        match self {
            DriveDirection::TowardHighX => 90.0,
            DriveDirection::TowardLowX => 270.0,
        }
    }

    pub fn flipped(self) -> DriveDirection {
        match self {
            DriveDirection::TowardHighX => DriveDirection::TowardLowX,
            DriveDirection::TowardLowX => DriveDirection::TowardHighX,
        }
    }
}

/// Normalize a heading in degrees to `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d == 360.0 {
        0.0
    } else {
        d
    }
}

/// Wrap an angle difference in degrees to `[-180, 180]`.
pub fn wrap_deg_180(deg: f64) -> f64 {
    let mut d = deg.rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_wraps_into_range() {
        assert_eq!(normalize_deg(360.0), 0.0);
        assert_eq!(normalize_deg(-90.0), 270.0);
        assert_eq!(normalize_deg(725.0), 5.0);
    }

    #[test]
    fn wrap_180_is_symmetric() {
        assert_eq!(wrap_deg_180(190.0), -170.0);
        assert_eq!(wrap_deg_180(-190.0), 170.0);
        assert_eq!(wrap_deg_180(180.0), 180.0);
    }
}
