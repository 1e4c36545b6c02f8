//! Kinematic turning-motion generator with exact groundtruth.
//!
//! Bodies are rigid: every frontal pair (hips, knees, shoulders) is a segment
//! perpendicular to the walking heading, so the ground-plane geometry of a
//! clip is known in closed form. A clip is described as a plan of walk and
//! turn segments; each turn follows a constant or smoothstep rate profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TurnDirection;
use crate::skeleton::{Group, JointId, SkeletonFrame, SkeletonSequence, UpAxis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid parameter `{field}`: {msg}")]
    Param { field: &'static str, msg: String },
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

fn param(field: &'static str, msg: impl Into<String>) -> SynthError {
    SynthError::Param {
        field,
        msg: msg.into(),
    }
}

fn require(ok: bool, field: &'static str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(param(field, msg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateProfile {
    #[default]
    Constant,
    /// 3u² - 2u³; peak rate is 1.5 × the mean rate.
    Smoothstep,
}

impl RateProfile {
    /// Fraction of the turn completed at normalised time `u` in [0, 1].
    pub fn progress(self, u: f64) -> f64 {
        match self {
            RateProfile::Constant => u,
            RateProfile::Smoothstep => u * u * (3.0 - 2.0 * u),
        }
    }

    /// Peak rate divided by mean rate.
    pub fn peak_factor(self) -> f64 {
        match self {
            RateProfile::Constant => 1.0,
            RateProfile::Smoothstep => 1.5,
        }
    }
}

/// Body geometry and capture settings shared by every segment of a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyParams {
    pub fps: f64,
    pub hip_width: f64,
    pub knee_width: f64,
    pub shoulder_width: f64,
    /// Frames by which knee and shoulder headings trail the hip heading.
    pub en_bloc_lag_frames: usize,
    pub walk_speed: f64,
    pub initial_heading_deg: f64,
    pub up_axis: UpAxis,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            fps: 30.0,
            hip_width: 0.30,
            knee_width: 0.20,
            shoulder_width: 0.38,
            en_bloc_lag_frames: 0,
            walk_speed: 1.0,
            initial_heading_deg: 0.0,
            up_axis: UpAxis::Z,
        }
    }
}

impl BodyParams {
    fn validate(&self) -> Result<()> {
        require(
            self.fps.is_finite() && self.fps > 0.0,
            "fps",
            "must be finite and > 0",
        )?;
        for (field, w) in [
            ("hip_width", self.hip_width),
            ("knee_width", self.knee_width),
            ("shoulder_width", self.shoulder_width),
        ] {
            require(w.is_finite() && w > 0.0, field, "must be finite and > 0")?;
        }
        require(
            self.walk_speed.is_finite() && self.walk_speed >= 0.0,
            "walk_speed",
            "must be finite and >= 0",
        )?;
        require(
            self.initial_heading_deg.is_finite(),
            "initial_heading_deg",
            "must be finite",
        )
    }

    fn frames(&self, duration_s: f64) -> usize {
        (duration_s * self.fps).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Walk {
        duration_s: f64,
    },
    /// `angle_deg` is signed, counter-clockwise positive.
    Turn {
        angle_deg: f64,
        duration_s: f64,
        profile: RateProfile,
    },
}

/// Single-turn clip: straight walk, turn, straight walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    #[serde(flatten)]
    pub body: BodyParams,
    pub turn_deg: f64,
    pub duration_s: f64,
    pub pre_walk_s: f64,
    pub post_walk_s: f64,
    pub rate_profile: RateProfile,
    pub direction: TurnDirection,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            body: BodyParams::default(),
            turn_deg: 90.0,
            duration_s: 1.5,
            pre_walk_s: 1.0,
            post_walk_s: 1.0,
            rate_profile: RateProfile::Constant,
            direction: TurnDirection::Ccw,
        }
    }
}

impl SynthParams {
    pub fn segments(&self) -> Vec<Segment> {
        vec![
            Segment::Walk {
                duration_s: self.pre_walk_s,
            },
            Segment::Turn {
                angle_deg: self.direction.sign() * self.turn_deg,
                duration_s: self.duration_s,
                profile: self.rate_profile,
            },
            Segment::Walk {
                duration_s: self.post_walk_s,
            },
        ]
    }
}

/// Analytic description of one generated turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnTruth {
    /// Unsigned magnitude.
    pub turn_deg: f64,
    pub direction: TurnDirection,
    /// Frame where rotation starts.
    pub start_frame: usize,
    /// One past the frame where rotation ends.
    pub end_frame: usize,
    pub mean_rate_deg_s: f64,
    pub max_rate_deg_s: f64,
    pub profile: RateProfile,
}

impl TurnTruth {
    pub fn transitions(&self) -> usize {
        self.end_frame - self.start_frame - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub clip_id: String,
    pub turns: Vec<TurnTruth>,
    /// Hip-pair heading per frame, degrees (ccw positive, unwrapped).
    pub heading_deg: Vec<f64>,
}

impl GroundTruth {
    /// Sum of unsigned turn magnitudes.
    pub fn total_turn_deg(&self) -> f64 {
        self.turns.iter().map(|t| t.turn_deg).sum()
    }
}

pub fn generate_turn(clip_id: &str, p: &SynthParams) -> Result<(SkeletonSequence, GroundTruth)> {
    require(
        p.turn_deg.is_finite() && p.turn_deg >= 0.0,
        "turn_deg",
        "must be finite and >= 0",
    )?;
    require(
        p.pre_walk_s.is_finite() && p.pre_walk_s >= 0.0,
        "pre_walk_s",
        "must be finite and >= 0",
    )?;
    require(
        p.post_walk_s.is_finite() && p.post_walk_s >= 0.0,
        "post_walk_s",
        "must be finite and >= 0",
    )?;
    generate_plan(clip_id, &p.body, &p.segments())
}

/// Builds a clip from consecutive segments. Frame count is
/// `1 + Σ round(duration_s * fps)`.
pub fn generate_plan(
    clip_id: &str,
    body: &BodyParams,
    segments: &[Segment],
) -> Result<(SkeletonSequence, GroundTruth)> {
    body.validate()?;
    let mut heading = vec![body.initial_heading_deg];
    let mut turns = Vec::new();
    for seg in segments {
        match *seg {
            Segment::Walk { duration_s } => {
                require(
                    duration_s.is_finite() && duration_s >= 0.0,
                    "duration_s",
                    "walk duration must be finite and >= 0",
                )?;
                let h = *heading.last().unwrap();
                heading.extend(std::iter::repeat_n(h, body.frames(duration_s)));
            }
            Segment::Turn {
                angle_deg,
                duration_s,
                profile,
            } => {
                require(
                    duration_s.is_finite() && duration_s > 0.0,
                    "duration_s",
                    "must be finite and > 0",
                )?;
                require(angle_deg.is_finite(), "turn_deg", "must be finite")?;
                let n = body.frames(duration_s);
                require(n >= 1, "duration_s", "turn shorter than one frame")?;
                require(
                    body.en_bloc_lag_frames < n,
                    "en_bloc_lag_frames",
                    "must be smaller than the turn frame count",
                )?;
                let start = heading.len() - 1;
                let h0 = heading[start];
                for k in 1..=n {
                    heading.push(h0 + angle_deg * profile.progress(k as f64 / n as f64));
                }
                let mean = angle_deg.abs() * body.fps / n as f64;
                turns.push(TurnTruth {
                    turn_deg: angle_deg.abs(),
                    direction: TurnDirection::from_signed(angle_deg),
                    start_frame: start,
                    end_frame: start + n + 1,
                    mean_rate_deg_s: mean,
                    max_rate_deg_s: mean * profile.peak_factor(),
                    profile,
                });
            }
        }
    }

    let lag = body.en_bloc_lag_frames;
    let mut pos = [0.0f64; 2];
    let mut frames = Vec::with_capacity(heading.len());
    for i in 0..heading.len() {
        if i > 0 {
            let step = body.walk_speed / body.fps;
            let (s, c) = heading[i].to_radians().sin_cos();
            pos[0] += step * c;
            pos[1] += step * s;
        }
        let upper = heading[i.saturating_sub(lag)];
        frames.push(pose(body, pos, heading[i], upper));
    }
    let seq = SkeletonSequence::new(clip_id, body.fps, body.up_axis, frames)
        .map_err(|e| param("fps", e.to_string()))?;
    Ok((
        seq,
        GroundTruth {
            clip_id: clip_id.to_string(),
            turns,
            heading_deg: heading,
        },
    ))
}

/// Places all 17 joints. `hip_heading` orients the pelvis and hips; knees,
/// ankles and the upper body follow `lagged_heading`.
fn pose(body: &BodyParams, pos: [f64; 2], hip_heading: f64, lagged_heading: f64) -> SkeletonFrame {
    // (forward offset, lateral offset to the left, height)
    let place = |heading: f64, fwd: f64, left: f64, h: f64| -> [f64; 3] {
        let (s, c) = heading.to_radians().sin_cos();
        let g1 = pos[0] + fwd * c - left * s;
        let g2 = pos[1] + fwd * s + left * c;
        match body.up_axis {
            UpAxis::Z => [g1, g2, h],
            UpAxis::Y => [g2, h, g1],
            UpAxis::X => [h, g1, g2],
        }
    };
    let hw = 0.5 * body.hip_width;
    let kw = 0.5 * body.knee_width;
    let sw = 0.5 * body.shoulder_width;
    let (hh, lh) = (hip_heading, lagged_heading);

    let mut f = SkeletonFrame::empty();
    let mut put = |j: JointId, p: [f64; 3]| f.set(j, Some(p));
    put(JointId::Pelvis, place(hh, 0.0, 0.0, 1.0));
    put(JointId::LeftHip, place(hh, 0.0, hw, 0.95));
    put(JointId::RightHip, place(hh, 0.0, -hw, 0.95));
    put(JointId::LeftKnee, place(lh, 0.02, kw, 0.52));
    put(JointId::RightKnee, place(lh, 0.02, -kw, 0.52));
    put(JointId::LeftAnkle, place(lh, -0.02, kw, 0.08));
    put(JointId::RightAnkle, place(lh, -0.02, -kw, 0.08));
    put(JointId::Spine, place(lh, 0.0, 0.0, 1.2));
    put(JointId::Thorax, place(lh, 0.0, 0.0, 1.45));
    put(JointId::Neck, place(lh, 0.02, 0.0, 1.55));
    put(JointId::Head, place(lh, 0.06, 0.0, 1.7));
    put(JointId::LeftShoulder, place(lh, 0.0, sw, 1.45));
    put(JointId::RightShoulder, place(lh, 0.0, -sw, 1.45));
    put(JointId::LeftElbow, place(lh, 0.0, sw + 0.03, 1.15));
    put(JointId::RightElbow, place(lh, 0.0, -sw - 0.03, 1.15));
    put(JointId::LeftWrist, place(lh, 0.05, sw + 0.03, 0.9));
    put(JointId::RightWrist, place(lh, 0.05, -sw - 0.03, 0.9));
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Standard deviation of isotropic Gaussian jitter per joint coordinate.
    pub jitter_sd: f64,
    /// Per joint, per frame probability of being marked missing.
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            jitter_sd: 0.0,
            dropout_prob: 0.0,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        require(
            self.jitter_sd.is_finite() && self.jitter_sd >= 0.0,
            "jitter_sd",
            "must be finite and >= 0",
        )?;
        require(
            (0.0..1.0).contains(&self.dropout_prob),
            "dropout_prob",
            "must be in [0, 1)",
        )
    }
}

/// Adds Gaussian jitter and random dropout; deterministic in `n.seed`.
pub fn add_noise(seq: &SkeletonSequence, n: &NoiseParams) -> Result<SkeletonSequence> {
    n.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
    let normal = Normal::new(0.0, n.jitter_sd.max(f64::MIN_POSITIVE)).expect("valid sd");
    let mut out = seq.clone();
    for frame in out.frames.iter_mut() {
        for j in JointId::ALL {
            let drop = rng.random::<f64>() < n.dropout_prob;
            let Some(mut p) = frame.joint(j) else {
                continue;
            };
            if n.jitter_sd > 0.0 {
                for c in p.iter_mut() {
                    *c += normal.sample(&mut rng);
                }
            }
            frame.set(j, if drop { None } else { Some(p) });
        }
    }
    Ok(out)
}

/// Per-item seed from a base seed, via the splitmix64 finaliser.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortParams {
    pub group: Group,
    pub subject_prefix: String,
    pub n_subjects: usize,
    pub turns_per_subject: usize,
    pub angle_mean_deg: f64,
    pub angle_sd_deg: f64,
    /// Per-subject maximum angular velocity, deg/s.
    pub rate_mean_deg_s: f64,
    pub rate_sd_deg_s: f64,
    pub pre_walk_s: f64,
    pub post_walk_s: f64,
    pub rate_profile: RateProfile,
    pub body: BodyParams,
}

impl Default for CohortParams {
    fn default() -> Self {
        Self {
            group: Group::Unknown,
            subject_prefix: "S".into(),
            n_subjects: 12,
            turns_per_subject: 4,
            angle_mean_deg: 90.0,
            angle_sd_deg: 15.0,
            rate_mean_deg_s: 140.0,
            rate_sd_deg_s: 30.0,
            pre_walk_s: 0.5,
            post_walk_s: 0.5,
            rate_profile: RateProfile::Smoothstep,
            body: BodyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortClip {
    pub subject_id: String,
    pub group: Group,
    pub sequence: SkeletonSequence,
    pub truth: GroundTruth,
}

/// Draws a characteristic turning angle and peak rate for every subject and
/// generates that subject's turns with alternating direction.
pub fn generate_cohort(p: &CohortParams, seed: u64) -> Result<Vec<CohortClip>> {
    require(p.n_subjects >= 2, "n_subjects", "must be >= 2")?;
    require(
        p.turns_per_subject >= 1,
        "turns_per_subject",
        "must be >= 1",
    )?;
    for (field, mean, sd) in [
        ("angle_mean_deg", p.angle_mean_deg, p.angle_sd_deg),
        ("rate_mean_deg_s", p.rate_mean_deg_s, p.rate_sd_deg_s),
    ] {
        require(
            mean.is_finite() && mean > 0.0,
            field,
            "must be finite and > 0",
        )?;
        require(
            sd.is_finite() && sd >= 0.0,
            field,
            "sd must be finite and >= 0",
        )?;
    }
    let angle_dist = Normal::new(p.angle_mean_deg, p.angle_sd_deg).expect("validated");
    let rate_dist = Normal::new(p.rate_mean_deg_s, p.rate_sd_deg_s).expect("validated");

    let mut out = Vec::with_capacity(p.n_subjects * p.turns_per_subject);
    for s in 0..p.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s as u64));
        let angle = angle_dist.sample(&mut rng).max(1.0);
        let peak_rate = rate_dist.sample(&mut rng).max(1.0);
        let duration_s = angle * p.rate_profile.peak_factor() / peak_rate;
        let subject_id = format!("{}{:02}", p.subject_prefix, s + 1);
        for t in 0..p.turns_per_subject {
            let direction = if t % 2 == 0 {
                TurnDirection::Ccw
            } else {
                TurnDirection::Cw
            };
            let params = SynthParams {
                body: p.body.clone(),
                turn_deg: angle,
                duration_s,
                pre_walk_s: p.pre_walk_s,
                post_walk_s: p.post_walk_s,
                rate_profile: p.rate_profile,
                direction,
            };
            let clip_id = format!("{subject_id}_t{:02}", t + 1);
            let (sequence, truth) = generate_turn(&clip_id, &params)?;
            out.push(CohortClip {
                subject_id: subject_id.clone(),
                group: p.group,
                sequence,
                truth,
            });
        }
    }
    Ok(out)
}

/// A batch of single-turn clips with angles and durations drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    pub count: usize,
    pub clip_prefix: String,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub duration_min_s: f64,
    pub duration_max_s: f64,
    pub pre_walk_s: f64,
    pub post_walk_s: f64,
    pub rate_profile: RateProfile,
    pub body: BodyParams,
    /// Applied per clip with a seed derived from the suite seed.
    pub noise: Option<NoiseParams>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            count: 10,
            clip_prefix: "synth_".into(),
            angle_min_deg: 45.0,
            angle_max_deg: 225.0,
            duration_min_s: 4.0,
            duration_max_s: 6.0,
            pre_walk_s: 0.5,
            post_walk_s: 0.5,
            rate_profile: RateProfile::Constant,
            body: BodyParams::default(),
            noise: None,
        }
    }
}

pub fn generate_suite(p: &SuiteParams, seed: u64) -> Result<Vec<(SkeletonSequence, GroundTruth)>> {
    require(
        p.angle_min_deg.is_finite() && p.angle_min_deg >= 0.0 && p.angle_min_deg <= p.angle_max_deg,
        "angle_min_deg",
        "need 0 <= angle_min_deg <= angle_max_deg",
    )?;
    require(
        p.angle_max_deg.is_finite(),
        "angle_max_deg",
        "must be finite",
    )?;
    require(
        p.duration_min_s.is_finite()
            && p.duration_min_s > 0.0
            && p.duration_min_s <= p.duration_max_s,
        "duration_min_s",
        "need 0 < duration_min_s <= duration_max_s",
    )?;
    require(
        p.duration_max_s.is_finite(),
        "duration_max_s",
        "must be finite",
    )?;
    (0..p.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let turn_deg = uniform(&mut rng, p.angle_min_deg, p.angle_max_deg);
            let duration_s = uniform(&mut rng, p.duration_min_s, p.duration_max_s);
            let direction = if rng.random::<bool>() {
                TurnDirection::Ccw
            } else {
                TurnDirection::Cw
            };
            let params = SynthParams {
                body: p.body.clone(),
                turn_deg,
                duration_s,
                pre_walk_s: p.pre_walk_s,
                post_walk_s: p.post_walk_s,
                rate_profile: p.rate_profile,
                direction,
            };
            let clip_id = format!("{}{:04}", p.clip_prefix, i);
            let (seq, truth) = generate_turn(&clip_id, &params)?;
            let seq = match &p.noise {
                Some(n) => add_noise(
                    &seq,
                    &NoiseParams {
                        seed: derive_seed(n.seed ^ seed, i as u64),
                        ..n.clone()
                    },
                )?,
                None => seq,
            };
            Ok((seq, truth))
        })
        .collect()
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
