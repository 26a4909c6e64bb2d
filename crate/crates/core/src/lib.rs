//! Continuous-time valuation of football plays from player-tracking data.
//!
//! The pipeline turns 10 Hz tracking frames into per-frame estimates of how a
//! play will end: a ball-carrier model predicts expected yards gained from the
//! current position, a decision-tree combinator composes pass-play sub-models
//! into an expected end-of-play yard line, and a conditional density estimator
//! over end-of-play yard lines lets arbitrary play-value functions (expected
//! points, win probability) be integrated per frame.
//!
//! Modules follow the data flow:
//!
//! * [`ingest`] — parse tracking CSVs into validated [`ingest::Play`]s and
//!   extract ball-carrier sequences with per-frame yardage labels.
//! * [`geometry`] — endzone-adjusted coordinates, ball-carrier-relative
//!   features, and Voronoi tessellation features.
//! * [`featurize`] — assemble the per-frame feature rows, standardize, and
//!   build padded sequences for the recurrent model.
//! * [`models`] — the five ball-carrier regression families behind one
//!   interface: intercept, LASSO, gradient-boosted trees, feedforward net,
//!   and LSTM.
//! * [`evaluate`] — leave-one-week-out cross-validation, error diagnostics by
//!   frame offset, feature importance, and player aggregation.
//! * [`valuation`] — the play-value framework combinator, conditional density
//!   estimation of the end-of-play yard line, and expected-value integration
//!   against pluggable value functions.
//! * [`synthgen`] — seeded generator of physically plausible tracking plays
//!   with known ground-truth labels.

pub mod featurize;
pub mod field;
pub mod geometry;
pub mod ingest;
pub mod models;
pub mod synthgen;

pub use field::{DriveDirection, FIELD_LENGTH, FIELD_WIDTH, FRAME_DT};
