//! Seeded generator of physically plausible 22-player tracking plays with
//! known ground-truth labels.
//!
//! Each play simulates a run: a carrier accelerates toward the target
//! endzone with bounded acceleration and lateral steering noise, defenders
//! pursue with proportional navigation (slowed while a blocker engages
//! them), and the carry ends through a configurable outcome process. The
//! generator emits exactly the ingest CSV schema, so every produced play
//! passes validation with zero exclusions, and it records the per-frame
//! yards-remaining labels independently of the ingest pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::field::{normalize_deg, DriveDirection, FRAME_DT};
use crate::geometry::adjust_x;
use crate::ingest::{Event, Frame, Play, PlayType, PlayerId, PlayerState, TeamSide};

/// Carrier/pursuer movement bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinematicsConfig {
    /// Per-play carrier max speed is uniform in `[min, max]` yd/s.
    pub carrier_speed_min: f64,
    pub carrier_speed_max: f64,
    /// Per-defender max speed is uniform in `[min, max]` yd/s.
    pub defender_speed_min: f64,
    pub defender_speed_max: f64,
    pub blocker_speed: f64,
    /// Acceleration cap, yd/s².
    pub max_accel: f64,
    /// Scale of the AR(1) steering noise on the carrier's heading, radians.
    pub steer_noise: f64,
    /// Fraction of max speed the carrier holds at the handoff frame.
    pub initial_speed_frac: f64,
    /// A defender within this distance of a blocker is slowed.
    pub block_radius: f64,
    /// Seconds of lead the pursuit aims ahead of the carrier.
    pub pursuit_lead: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            carrier_speed_min: 7.5,
            carrier_speed_max: 9.5,
            defender_speed_min: 7.2,
            defender_speed_max: 8.8,
            blocker_speed: 5.0,
            max_accel: 3.5,
            steer_noise: 0.15,
            initial_speed_frac: 0.5,
            block_radius: 1.6,
            pursuit_lead: 0.55,
        }
    }
}

/// Per-frame logistic tackle hazard during the carry:
/// `logit p = bias - distance_weight·d1 + speed_weight·(bc_s - 8)
///           + interaction_weight·max(0, 2.5-d1)·max(0, closing-4)
///           + dwell_weight·(consecutive frames with d1 < dwell_radius)`
/// where `d1` is the closest defender's distance to the carrier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HazardConfig {
    pub bias: f64,
    pub distance_weight: f64,
    pub speed_weight: f64,
    pub interaction_weight: f64,
    pub dwell_weight: f64,
    pub dwell_radius: f64,
}

impl Default for HazardConfig {
    fn default() -> Self {
        HazardConfig {
            bias: 0.5,
            distance_weight: 1.4,
            speed_weight: 0.0,
            interaction_weight: 0.0,
            dwell_weight: 0.0,
            dwell_radius: 2.0,
        }
    }
}

/// How a carry ends.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeProcess {
    /// Defender-separation hazard; ends in tackle, touchdown, or the rare
    /// out-of-bounds.
    Hazard(HazardConfig),
    /// Mixture for density tests: with `breakaway_prob` the defenders are
    /// slowed and the play runs to the endzone; otherwise the carry is
    /// tackled once the carrier has gained a per-play target drawn from
    /// `N(gain_mean, gain_sd)`.
    TwoComponent {
        breakaway_prob: f64,
        gain_mean: f64,
        gain_sd: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub weeks: u32,
    pub plays_per_week: u32,
    /// Line of scrimmage drawn uniform in `[los_min, los_max]` yards from
    /// the target endzone.
    pub los_min: f64,
    pub los_max: f64,
    pub kinematics: KinematicsConfig,
    pub outcome: OutcomeProcess,
    /// Forced tackle after this many carry frames.
    pub max_carry_frames: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            weeks: 6,
            plays_per_week: 120,
            los_min: 30.0,
            los_max: 75.0,
            kinematics: KinematicsConfig::default(),
            outcome: OutcomeProcess::Hazard(HazardConfig::default()),
            max_carry_frames: 120,
        }
    }
}

/// Named-feature outcome effects for planted-signal corpora.
///
/// Each weight plants predictive signal through the named feature:
/// `defense1_dist_weight` through `defense1_dist_to_ball`,
/// `carrier_speed_weight` and `carrier_speed_spread` through `bc_s`,
/// `interaction_weight` through a proximity×closing-speed product no linear
/// model can represent, and `dwell_weight` through tackle dynamics that
/// depend on how long a defender has stayed close (visible only to models
/// that see the frame history).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalSpec {
    pub hazard_bias: f64,
    pub defense1_dist_weight: f64,
    pub carrier_speed_weight: f64,
    pub carrier_speed_spread: f64,
    pub interaction_weight: f64,
    pub dwell_weight: f64,
    pub dwell_radius: f64,
}

impl SignalSpec {
    /// No signal: constant hazard, one carrier speed, straight runs.
    pub fn null() -> SignalSpec {
        SignalSpec {
            hazard_bias: -3.2,
            defense1_dist_weight: 0.0,
            carrier_speed_weight: 0.0,
            carrier_speed_spread: 0.0,
            interaction_weight: 0.0,
            dwell_weight: 0.0,
            dwell_radius: 2.0,
        }
    }

    /// Signal carried linearly by closest-defender distance and carrier
    /// speed; LASSO should recover both signs (more separation and more
    /// speed both mean more yards).
    pub fn linear() -> SignalSpec {
        SignalSpec {
            hazard_bias: 0.8,
            defense1_dist_weight: 1.2,
            carrier_speed_weight: 0.0,
            carrier_speed_spread: 2.0,
            interaction_weight: 0.0,
            dwell_weight: 0.0,
            dwell_radius: 2.0,
        }
    }

    /// Signal through a proximity×closing-speed product.
    pub fn interaction() -> SignalSpec {
        SignalSpec {
            hazard_bias: -2.6,
            defense1_dist_weight: 0.0,
            carrier_speed_weight: 0.0,
            carrier_speed_spread: 0.0,
            interaction_weight: 1.1,
            dwell_weight: 0.0,
            dwell_radius: 2.0,
        }
    }

    /// Distance signal plus a strong dwell term: the tackle arrives after a
    /// defender has stayed close for several consecutive frames, which only
    /// history-aware models can see.
    pub fn temporal() -> SignalSpec {
        SignalSpec {
            hazard_bias: -1.2,
            defense1_dist_weight: 0.9,
            carrier_speed_weight: 0.0,
            carrier_speed_spread: 2.0,
            interaction_weight: 0.0,
            dwell_weight: 0.55,
            dwell_radius: 2.5,
        }
    }
}

/// Labels recorded by the generator, independent of the ingest pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSequence {
    pub game_id: String,
    pub play_id: String,
    pub week: u32,
    pub carrier_id: PlayerId,
    pub start_frame: u32,
    pub end_frame: u32,
    pub labels: Vec<f64>,
    pub end_yardline: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SyntheticCorpus {
    pub plays: Vec<Play>,
    pub ground_truth: Vec<GroundTruthSequence>,
    pub config: GeneratorConfig,
}

/// Generate a full corpus under the configured outcome process.
pub fn generate_corpus(config: &GeneratorConfig) -> SyntheticCorpus {
    let mut plays = Vec::new();
    let mut ground_truth = Vec::new();
    for week in 1..=config.weeks {
        for idx in 1..=config.plays_per_week {
            let mut rng = play_rng(config.seed, week, idx);
            let (play, truth) = generate_play(config, week, idx, &mut rng);
            plays.push(play);
            ground_truth.push(truth);
        }
    }
    SyntheticCorpus {
        plays,
        ground_truth,
        config: config.clone(),
    }
}

/// Corpus whose outcomes carry known predictive signal per `spec`.
pub fn planted_signal_corpus(base: &GeneratorConfig, spec: &SignalSpec) -> SyntheticCorpus {
    let mut cfg = base.clone();
    cfg.kinematics.carrier_speed_min =
        cfg.kinematics.carrier_speed_max - spec.carrier_speed_spread;
    if spec.defense1_dist_weight == 0.0
        && spec.interaction_weight == 0.0
        && spec.dwell_weight == 0.0
        && spec.carrier_speed_weight == 0.0
    {
        // Pure-noise outcomes: remove incidental kinematic signal too.
        cfg.kinematics.steer_noise = 0.0;
        cfg.kinematics.initial_speed_frac = 1.0;
        cfg.los_min = 65.0;
        cfg.los_max = 75.0;
    }
    cfg.outcome = OutcomeProcess::Hazard(HazardConfig {
        bias: spec.hazard_bias,
        distance_weight: spec.defense1_dist_weight,
        speed_weight: spec.carrier_speed_weight,
        interaction_weight: spec.interaction_weight,
        dwell_weight: spec.dwell_weight,
        dwell_radius: spec.dwell_radius,
    });
    generate_corpus(&cfg)
}

/// Short-gain vs breakaway-touchdown mixture, all plays from one spot, for
/// density bimodality tests. Returns the corpus and the two outcome modes
/// (end yardlines) it plants.
pub fn two_component_corpus(
    seed: u64,
    weeks: u32,
    plays_per_week: u32,
    los: f64,
    breakaway_prob: f64,
    gain_mean: f64,
) -> (SyntheticCorpus, [f64; 2]) {
    let cfg = GeneratorConfig {
        seed,
        weeks,
        plays_per_week,
        los_min: los,
        los_max: los,
        outcome: OutcomeProcess::TwoComponent {
            breakaway_prob,
            gain_mean,
            gain_sd: 1.5,
        },
        ..GeneratorConfig::default()
    };
    (generate_corpus(&cfg), [los - gain_mean, 0.0])
}

/// SplitMix64-style derivation so plays are independent of generation order.
fn play_rng(seed: u64, week: u32, idx: u32) -> ChaCha8Rng {
    let mut z = seed
        ^ (u64::from(week) << 32)
        ^ u64::from(idx).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Internal simulation state in "progress space": the first coordinate `d`
/// is yards from the target endzone (decreasing as the entity advances), the
/// second `w` is the raw cross-field `y`.
struct Entity {
    id: PlayerId,
    side: TeamSide,
    pos: (f64, f64),
    vel: (f64, f64),
    dir_deg: f64,
    max_speed: f64,
}

impl Entity {
    /// Accelerate toward the desired velocity under the cap and move one
    /// frame. Positions are clamped to stay on the field, and the recorded
    /// velocity is re-derived from the actual displacement so that speed,
    /// distance, and position stay exactly consistent.
    fn step(&mut self, v_des: (f64, f64), max_accel: f64, drive: DriveDirection) -> f64 {
        let mut ax = v_des.0 - self.vel.0;
        let mut ay = v_des.1 - self.vel.1;
        let norm = (ax * ax + ay * ay).sqrt();
        let cap = max_accel * FRAME_DT;
        if norm > cap {
            ax *= cap / norm;
            ay *= cap / norm;
        }
        self.vel.0 += ax;
        self.vel.1 += ay;
        let old = self.pos;
        let mut new = (
            self.pos.0 + self.vel.0 * FRAME_DT,
            self.pos.1 + self.vel.1 * FRAME_DT,
        );
        new.0 = new.0.clamp(-9.5, 109.5);
        new.1 = new.1.clamp(0.4, 52.9);
        self.vel = ((new.0 - old.0) / FRAME_DT, (new.1 - old.1) / FRAME_DT);
        self.pos = new;
        let speed = (self.vel.0 * self.vel.0 + self.vel.1 * self.vel.1).sqrt();
        if speed > 1e-9 {
            self.dir_deg = heading_deg(self.vel, drive);
        }
        let dis = ((new.0 - old.0).powi(2) + (new.1 - old.1).powi(2)).sqrt();
        dis
    }

    fn state(&self, drive: DriveDirection, dis: f64) -> PlayerState {
        let (x, y) = to_raw(self.pos, drive);
        let speed = (self.vel.0 * self.vel.0 + self.vel.1 * self.vel.1).sqrt();
        PlayerState {
            player_id: self.id.clone(),
            team_side: self.side,
            x,
            y,
            s: speed,
            dis,
            dir: self.dir_deg,
        }
    }
}

fn to_raw(pos: (f64, f64), drive: DriveDirection) -> (f64, f64) {
    match drive {
        DriveDirection::TowardHighX => (110.0 - pos.0, pos.1),
        DriveDirection::TowardLowX => (10.0 + pos.0, pos.1),
    }
}

/// Heading of a progress-space velocity in the raw dir convention
/// (degrees clockwise from +y).
fn heading_deg(vel: (f64, f64), drive: DriveDirection) -> f64 {
    let dx = match drive {
        DriveDirection::TowardHighX => -vel.0,
        DriveDirection::TowardLowX => vel.0,
    };
    let dy = vel.1;
    normalize_deg(dx.atan2(dy).to_degrees())
}

fn unit_toward(from: (f64, f64), to: (f64, f64)) -> (f64, f64) {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let n = (dx * dx + dy * dy).sqrt();
    if n < 1e-9 {
        (0.0, 0.0)
    } else {
        (dx / n, dy / n)
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn generate_play(
    config: &GeneratorConfig,
    week: u32,
    idx: u32,
    rng: &mut ChaCha8Rng,
) -> (Play, GroundTruthSequence) {
    let kin = &config.kinematics;
    let drive = if rng.gen_bool(0.5) {
        DriveDirection::TowardHighX
    } else {
        DriveDirection::TowardLowX
    };
    let los = rng.gen_range(config.los_min..=config.los_max);
    let carrier_speed = rng.gen_range(kin.carrier_speed_min..=kin.carrier_speed_max);
    let carrier_no = rng.gen_range(0..12u32);
    let carrier_w = 26.65 + rng.gen_range(-8.0..8.0);

    // Outcome-process draws happen up front so the frame loop's rng use is
    // identical across processes.
    let (breakaway, gain_target) = match &config.outcome {
        OutcomeProcess::Hazard(_) => (false, f64::INFINITY),
        OutcomeProcess::TwoComponent {
            breakaway_prob,
            gain_mean,
            gain_sd,
        } => {
            let b = rng.gen_bool(*breakaway_prob);
            let g = Normal::new(*gain_mean, *gain_sd)
                .unwrap()
                .sample(rng)
                .max(0.5);
            (b, if b { f64::INFINITY } else { g })
        }
    };

    let mut carrier = Entity {
        id: PlayerId(format!("rb{carrier_no:02}")),
        side: TeamSide::Offense,
        pos: (los + 5.0 + rng.gen_range(-1.0..1.0), carrier_w),
        vel: (0.0, 0.0),
        dir_deg: heading_deg((-1.0, 0.0), drive),
        max_speed: carrier_speed,
    };
    // The designed hole the run aims for.
    let hole_w = (carrier_w + rng.gen_range(-8.0..8.0)).clamp(6.0, 47.3);

    let slow_factor = if breakaway { 0.55 } else { 1.0 };
    let mut defenders: Vec<Entity> = (0..11)
        .map(|i| {
            let (depth, w) = if i < 7 {
                // Front eight, spread to the sides of the hole.
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                let offset = side * rng.gen_range(6.0..19.0);
                (rng.gen_range(2.0..9.0), hole_w + offset)
            } else {
                // Deep defenders hold contain lanes across the width.
                let lane = 6.0 + 13.0 * (i - 7) as f64;
                (rng.gen_range(16.0..30.0), lane + rng.gen_range(-3.0..3.0))
            };
            let speed = rng.gen_range(kin.defender_speed_min..=kin.defender_speed_max);
            Entity {
                id: PlayerId(format!("db{i:02}")),
                side: TeamSide::Defense,
                pos: ((los - depth).max(0.5), w.clamp(1.0, 52.0)),
                vel: (0.0, 0.0),
                dir_deg: heading_deg((1.0, 0.0), drive),
                max_speed: speed * slow_factor,
            }
        })
        .collect();
    // How slow each defender moves while a blocker engages them.
    let block_strength: Vec<f64> = (0..defenders.len())
        .map(|_| rng.gen_range(0.18..0.45))
        .collect();
    let mut shed = vec![false; defenders.len()];

    // Blockers 0..7 line up in the path of the front eight; the last two
    // lead upfield at the first two deep defenders.
    let mut blockers: Vec<Entity> = (0..10)
        .map(|i| {
            let (d, w) = if i < 7 {
                (defenders[i].pos.0 + 1.0, defenders[i].pos.1 + rng.gen_range(-0.5..0.5))
            } else {
                (los - 1.0, hole_w + (i as f64 - 8.0) * 2.0)
            };
            Entity {
                id: PlayerId(format!("ol{i:02}")),
                side: TeamSide::Offense,
                pos: (d.max(0.5), w.clamp(2.0, 51.0)),
                vel: (0.0, 0.0),
                dir_deg: heading_deg((-1.0, 0.0), drive),
                max_speed: kin.blocker_speed,
            }
        })
        .collect();

    let handoff_frame: u32 = rng.gen_range(7..=10);
    let mut frames: Vec<Frame> = Vec::new();
    let mut steer = 0.0_f64;
    let steer_dist = Normal::new(0.0, 1.0).unwrap();
    let mut dwell: u32 = 0;
    let mut prev_d1 = f64::INFINITY;
    let mut first_contact_done = false;
    let carrier_start_d = carrier.pos.0;

    let hazard = match &config.outcome {
        OutcomeProcess::Hazard(h) => h.clone(),
        OutcomeProcess::TwoComponent { .. } => HazardConfig {
            bias: f64::NEG_INFINITY,
            ..HazardConfig::default()
        },
    };

    let mut frame_id: u32 = 0;
    let mut end_reached = false;
    while !end_reached {
        frame_id += 1;
        let in_carry = frame_id >= handoff_frame;
        let mut events: Vec<Event> = Vec::new();
        if frame_id == 1 {
            events.push(Event::Snap);
        }
        if frame_id == handoff_frame {
            events.push(Event::Handoff);
            if kin.initial_speed_frac > 0.0 {
                carrier.vel = (-kin.initial_speed_frac * carrier.max_speed, 0.0);
            }
        }

        // Desired velocities.
        let carrier_des = if in_carry {
            // Aim for the hole until through the line, evade the nearest
            // defender ahead, bend away from the sidelines, and wander a
            // little.
            let mut target = 0.0_f64;
            if carrier.pos.0 > los - 2.0 {
                target += (0.12 * (hole_w - carrier.pos.1)).clamp(-0.6, 0.6);
            }
            let threat = defenders
                .iter()
                .filter(|d| d.pos.0 < carrier.pos.0 + 1.0)
                .map(|d| (dist(d.pos, carrier.pos), d.pos.1 - carrier.pos.1))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            if let Some((d, lateral)) = threat {
                if d < 6.0 {
                    let side = if lateral.abs() < 0.3 {
                        if carrier.pos.1 < 26.65 {
                            1.0
                        } else {
                            -1.0
                        }
                    } else {
                        -lateral.signum()
                    };
                    target += side * 0.75 * (6.0 - d) / 6.0;
                }
            }
            if carrier.pos.1 < 10.0 {
                target += 0.8 * (10.0 - carrier.pos.1) / 10.0;
            } else if carrier.pos.1 > 43.3 {
                target -= 0.8 * (carrier.pos.1 - 43.3) / 10.0;
            }
            steer = 0.8 * steer + 0.2 * target + kin.steer_noise * steer_dist.sample(rng);
            steer = steer.clamp(-0.7, 0.7);
            (
                -carrier.max_speed * steer.cos(),
                carrier.max_speed * steer.sin(),
            )
        } else {
            // Drift up to the line before the handoff.
            (-1.5, 0.0)
        };
        let carrier_dis = carrier.step(carrier_des, kin.max_accel, drive);

        let mut blocker_dis = [0.0f64; 10];
        for (i, b) in blockers.iter_mut().enumerate() {
            let des = if in_carry {
                let target = defenders[i.min(defenders.len() - 2)].pos;
                let u = unit_toward(b.pos, target);
                (u.0 * b.max_speed, u.1 * b.max_speed)
            } else {
                (0.0, 0.0)
            };
            blocker_dis[i] = b.step(des, kin.max_accel, drive);
        }

        let mut defender_dis = [0.0f64; 11];
        for (i, d) in defenders.iter_mut().enumerate() {
            let des = if in_carry {
                let blocked = !shed[i]
                    && blockers
                        .iter()
                        .any(|b| dist(b.pos, d.pos) < kin.block_radius);
                if blocked && rng.gen::<f64>() < 0.03 {
                    shed[i] = true;
                }
                let eff = if blocked && !shed[i] {
                    block_strength[i] * d.max_speed
                } else {
                    d.max_speed
                };
                let target = (
                    carrier.pos.0 + kin.pursuit_lead * carrier.vel.0,
                    carrier.pos.1 + kin.pursuit_lead * carrier.vel.1,
                );
                let u = unit_toward(d.pos, target);
                (u.0 * eff, u.1 * eff)
            } else {
                (
                    rng.gen_range(-0.3..0.3_f64),
                    rng.gen_range(-0.3..0.3_f64),
                )
            };
            defender_dis[i] = d.step(des, kin.max_accel, drive);
        }

        // Carry bookkeeping and end conditions.
        if in_carry {
            if frame_id - handoff_frame > 25 {
                carrier.max_speed *= 0.996;
            }
            let d1 = defenders
                .iter()
                .map(|d| dist(d.pos, carrier.pos))
                .fold(f64::INFINITY, f64::min);
            let closing = if prev_d1.is_finite() {
                ((prev_d1 - d1) / FRAME_DT).max(0.0)
            } else {
                0.0
            };
            prev_d1 = d1;
            if d1 < hazard.dwell_radius {
                dwell += 1;
            } else {
                dwell = 0;
            }
            if !first_contact_done && d1 < 1.5 {
                events.push(Event::FirstContact);
                first_contact_done = true;
            }

            let carry_frames = frame_id - handoff_frame + 1;
            let gained = carrier_start_d - carrier.pos.0;
            let carrier_speed_now =
                (carrier.vel.0 * carrier.vel.0 + carrier.vel.1 * carrier.vel.1).sqrt();

            // The hazard draw is consumed every carry frame to keep the rng
            // stream identical whichever end condition fires.
            let eta = hazard.bias - hazard.distance_weight * d1
                + hazard.speed_weight * (carrier_speed_now - 8.0)
                + hazard.interaction_weight * (2.5 - d1).max(0.0) * (closing - 4.0).max(0.0)
                + hazard.dwell_weight * f64::from(dwell);
            let p_end = 1.0 / (1.0 + (-eta).exp());
            let u: f64 = rng.gen();

            if carrier.pos.1 <= 0.4 || carrier.pos.1 >= 52.9 {
                events.push(Event::OutOfBounds);
                end_reached = true;
            } else if carrier.pos.0 <= 0.0 {
                events.push(Event::Touchdown);
                end_reached = true;
            } else if gained >= gain_target {
                events.push(Event::Tackle);
                end_reached = true;
            } else if u < p_end {
                events.push(Event::Tackle);
                end_reached = true;
            } else if carry_frames >= config.max_carry_frames {
                events.push(Event::Tackle);
                end_reached = true;
            }
        }

        // Assemble the frame.
        let first_frame = frame_id == 1;
        let mut players = Vec::with_capacity(22);
        players.push(carrier.state(drive, if first_frame { 0.0 } else { carrier_dis }));
        for (i, b) in blockers.iter().enumerate() {
            players.push(b.state(drive, if first_frame { 0.0 } else { blocker_dis[i] }));
        }
        for (i, d) in defenders.iter().enumerate() {
            players.push(d.state(drive, if first_frame { 0.0 } else { defender_dis[i] }));
        }
        players.sort_by(|a, b| {
            let side = |t: TeamSide| matches!(t, TeamSide::Defense) as u8;
            side(a.team_side)
                .cmp(&side(b.team_side))
                .then_with(|| a.player_id.cmp(&b.player_id))
        });
        let mut ball = carrier.state(drive, if first_frame { 0.0 } else { carrier_dis });
        ball.player_id = PlayerId("ball".into());
        ball.team_side = TeamSide::Ball;

        Event::sort_canonical(&mut events);
        frames.push(Frame {
            frame_id,
            time_index: FRAME_DT * (frame_id - 1) as f64,
            events,
            players,
            ball: Some(ball),
        });
    }

    let game_id = format!("g{week:02}");
    let play_id = format!("p{idx:03}");
    let possession_team = if idx % 2 == 0 { "HOME" } else { "AWAY" };

    // Ground-truth labels straight from the carrier trajectory over the
    // carry window.
    let carrier_id = carrier.id.clone();
    let start_idx = (handoff_frame - 1) as usize;
    let x_adj: Vec<f64> = frames[start_idx..]
        .iter()
        .map(|f| {
            let p = f.player(&carrier_id).unwrap();
            adjust_x(p.x, drive)
        })
        .collect();
    let end_yardline = *x_adj.last().unwrap();
    let labels: Vec<f64> = x_adj.iter().map(|x| x - end_yardline).collect();

    let truth = GroundTruthSequence {
        game_id: game_id.clone(),
        play_id: play_id.clone(),
        week,
        carrier_id,
        start_frame: handoff_frame,
        end_frame: frames.last().unwrap().frame_id,
        labels,
        end_yardline,
    };

    let play = Play {
        game_id,
        play_id,
        week,
        possession_team: possession_team.to_string(),
        drive_direction: drive,
        drive_direction_inferred: false,
        play_type: PlayType::Run,
        frames,
    };
    (play, truth)
}
