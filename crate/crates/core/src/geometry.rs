//! Ground-plane body vectors and turning-angle accumulation.
//!
//! A body vector is the left joint minus the right joint of a frontal-plane
//! pair (hips, knees, shoulders), projected onto the ground plane. The turning
//! angle of a clip is the sum over consecutive frames of the angle between
//! successive body vectors, averaged across the selected pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{JointId, SkeletonFrame, SkeletonSequence, UpAxis, NUM_JOINTS};

/// Vectors shorter than this are always degenerate.
pub const ABS_EPSILON: f64 = 1e-12;
/// Vectors shorter than this fraction of the clip's median pair length are degenerate.
pub const REL_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("frame {frame}: joint {joint} missing")]
    MissingJoint { frame: usize, joint: &'static str },
    #[error("frame {frame}: degenerate {pair} vector (|v| = {norm:e})")]
    DegenerateVector {
        frame: usize,
        pair: JointPair,
        norm: f64,
    },
    #[error("sequence too short: {0} frames, need at least 2")]
    TooShort(usize),
    #[error("no usable transition: every frame pair has missing or degenerate joints")]
    NoUsableTransition,
    #[error("no per-transition angles")]
    EmptySteps,
    #[error("invalid joint pair set: {0}")]
    PairSet(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JointPair {
    Hip,
    Knee,
    Shoulder,
}

impl JointPair {
    pub const ALL: [JointPair; 3] = [JointPair::Hip, JointPair::Knee, JointPair::Shoulder];

    /// (left, right) joints of the pair.
    pub fn joints(self) -> (JointId, JointId) {
        match self {
            JointPair::Hip => (JointId::LeftHip, JointId::RightHip),
            JointPair::Knee => (JointId::LeftKnee, JointId::RightKnee),
            JointPair::Shoulder => (JointId::LeftShoulder, JointId::RightShoulder),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointPair::Hip => "hip",
            JointPair::Knee => "knee",
            JointPair::Shoulder => "shoulder",
        }
    }
}

impl fmt::Display for JointPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JointPair {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hip" | "hips" => Ok(JointPair::Hip),
            "knee" | "knees" => Ok(JointPair::Knee),
            "shoulder" | "shoulders" => Ok(JointPair::Shoulder),
            other => Err(GeometryError::PairSet(format!(
                "unknown joint pair `{other}`"
            ))),
        }
    }
}

/// Non-empty, duplicate-free set of joint pairs, kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointPairSet(Vec<JointPair>);

impl JointPairSet {
    pub fn new(pairs: &[JointPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(GeometryError::PairSet("empty".into()));
        }
        let mut v = pairs.to_vec();
        v.sort();
        v.dedup();
        if v.len() != pairs.len() {
            return Err(GeometryError::PairSet("duplicate pair".into()));
        }
        Ok(Self(v))
    }

    pub fn hip() -> Self {
        Self(vec![JointPair::Hip])
    }

    /// Hips and knees, the best-performing combination.
    pub fn hip_knee() -> Self {
        Self(vec![JointPair::Hip, JointPair::Knee])
    }

    pub fn pairs(&self) -> &[JointPair] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for JointPairSet {
    fn default() -> Self {
        Self::hip_knee()
    }
}

impl fmt::Display for JointPairSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|p| p.as_str()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for JointPairSet {
    type Err = GeometryError;

    /// Accepts `hip,knee` or `hip+knee`.
    fn from_str(s: &str) -> Result<Self> {
        let pairs = s
            .split([',', '+'])
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<JointPair>>>()?;
        Self::new(&pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StepMode {
    /// arcsin of the normalised cross product; every step in [0, 90].
    #[default]
    UnsignedArcsin,
    /// atan2(cross, dot); steps in (-180, 180].
    SignedAtan2,
}

impl StepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StepMode::UnsignedArcsin => "unsigned",
            StepMode::SignedAtan2 => "signed",
        }
    }
}

impl FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unsigned" | "unsigned_arcsin" | "arcsin" => Ok(StepMode::UnsignedArcsin),
            "signed" | "signed_atan2" | "atan2" => Ok(StepMode::SignedAtan2),
            other => Err(format!(
                "unknown step mode `{other}` (expected unsigned or signed)"
            )),
        }
    }
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rotation sense viewed from above (up axis pointing at the viewer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Cw,
    Ccw,
}

impl TurnDirection {
    /// Ccw is positive.
    pub fn sign(self) -> f64 {
        match self {
            TurnDirection::Cw => -1.0,
            TurnDirection::Ccw => 1.0,
        }
    }

    pub fn from_signed(deg: f64) -> Self {
        if deg < 0.0 {
            TurnDirection::Cw
        } else {
            TurnDirection::Ccw
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            TurnDirection::Cw => TurnDirection::Ccw,
            TurnDirection::Ccw => TurnDirection::Cw,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TurnDirection::Cw => "cw",
            TurnDirection::Ccw => "ccw",
        }
    }
}

impl FromStr for TurnDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cw" => Ok(TurnDirection::Cw),
            "ccw" => Ok(TurnDirection::Ccw),
            other => Err(format!("unknown direction `{other}` (expected cw or ccw)")),
        }
    }
}

impl fmt::Display for TurnDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyVector {
    pub x: f64,
    pub y: f64,
    pub frame_index: usize,
    pub pair: JointPair,
}

impl BodyVector {
    pub fn new(x: f64, y: f64, frame_index: usize, pair: JointPair) -> Self {
        Self {
            x,
            y,
            frame_index,
            pair,
        }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    fn check(&self, floor: f64) -> Result<()> {
        let norm = self.norm();
        if !norm.is_finite() || norm < floor.max(ABS_EPSILON) {
            return Err(GeometryError::DegenerateVector {
                frame: self.frame_index,
                pair: self.pair,
                norm,
            });
        }
        Ok(())
    }
}

/// Drops the vertical component of every joint.
pub fn project_ground(frame: &SkeletonFrame, up_axis: UpAxis) -> [Option<[f64; 2]>; NUM_JOINTS] {
    let (a, b) = up_axis.ground_indices();
    let mut out = [None; NUM_JOINTS];
    for (dst, src) in out.iter_mut().zip(frame.joints()) {
        *dst = src.map(|p| [p[a], p[b]]);
    }
    out
}

fn raw_pair_vector(
    frame: &SkeletonFrame,
    frame_index: usize,
    pair: JointPair,
    up_axis: UpAxis,
) -> Result<BodyVector> {
    let (a, b) = up_axis.ground_indices();
    let (left, right) = pair.joints();
    let missing = |j: JointId| GeometryError::MissingJoint {
        frame: frame_index,
        joint: j.name(),
    };
    let l = frame.joint(left).ok_or_else(|| missing(left))?;
    let r = frame.joint(right).ok_or_else(|| missing(right))?;
    Ok(BodyVector::new(l[a] - r[a], l[b] - r[b], frame_index, pair))
}

/// Left-minus-right ground-plane vector of `pair`.
pub fn pair_vector(
    frame: &SkeletonFrame,
    frame_index: usize,
    pair: JointPair,
    up_axis: UpAxis,
) -> Result<BodyVector> {
    let v = raw_pair_vector(frame, frame_index, pair, up_axis)?;
    v.check(ABS_EPSILON)?;
    Ok(v)
}

/// Angle in degrees from `a` to `b`.
pub fn step_angle(a: &BodyVector, b: &BodyVector, mode: StepMode) -> Result<f64> {
    a.check(ABS_EPSILON)?;
    b.check(ABS_EPSILON)?;
    Ok(step_angle_unchecked(a, b, mode))
}

pub(crate) fn step_angle_unchecked(a: &BodyVector, b: &BodyVector, mode: StepMode) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    match mode {
        StepMode::UnsignedArcsin => {
            let s = (cross.abs() / (a.norm() * b.norm())).clamp(0.0, 1.0);
            s.asin().to_degrees()
        }
        StepMode::SignedAtan2 => {
            let dot = a.x * b.x + a.y * b.y;
            let deg = cross.atan2(dot).to_degrees();
            if deg <= -180.0 {
                180.0
            } else {
                deg
            }
        }
    }
}

/// Pair vectors for every frame, `None` where missing or degenerate. The
/// degeneracy floor is relative to the median vector length of the clip.
pub(crate) fn pair_series(seq: &SkeletonSequence, pair: JointPair) -> Vec<Option<BodyVector>> {
    let raw: Vec<Option<BodyVector>> = seq
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| raw_pair_vector(f, i, pair, seq.up_axis).ok())
        .collect();
    let floor = degeneracy_floor(&raw);
    raw.into_iter()
        .map(|v| v.filter(|v| v.check(floor).is_ok()))
        .collect()
}

pub(crate) fn degeneracy_floor(series: &[Option<BodyVector>]) -> f64 {
    let mut norms: Vec<f64> = series
        .iter()
        .flatten()
        .map(BodyVector::norm)
        .filter(|n| n.is_finite())
        .collect();
    if norms.is_empty() {
        return ABS_EPSILON;
    }
    norms.sort_by(f64::total_cmp);
    let mid = norms.len() / 2;
    let median = if norms.len().is_multiple_of(2) {
        0.5 * (norms[mid - 1] + norms[mid])
    } else {
        norms[mid]
    };
    (REL_EPSILON * median).max(ABS_EPSILON)
}

/// Turning summary of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnEstimate {
    pub theta_deg: f64,
    pub omega_deg_s: f64,
    pub w_max_deg_s: f64,
    /// One entry per transition, length T - 1. Skipped transitions hold 0.
    pub steps_deg: Vec<f64>,
    pub skipped_transitions: usize,
    pub pair_set: JointPairSet,
    pub mode: StepMode,
}

/// Per-transition angles averaged over `pairs`; `None` where any pair is
/// unusable in either frame. Signed steps are oriented counter-clockwise
/// viewed from above.
pub fn transition_steps(
    seq: &SkeletonSequence,
    pairs: &JointPairSet,
    mode: StepMode,
) -> Vec<Option<f64>> {
    let series: Vec<_> = pairs.pairs().iter().map(|&p| pair_series(seq, p)).collect();
    let sign = match mode {
        StepMode::UnsignedArcsin => 1.0,
        StepMode::SignedAtan2 => seq.up_axis.handedness(),
    };
    let n_pairs = pairs.len() as f64;
    (0..seq.len().saturating_sub(1))
        .map(|t| {
            let mut sum = 0.0;
            for s in &series {
                match (&s[t], &s[t + 1]) {
                    (Some(a), Some(b)) => sum += step_angle_unchecked(a, b, mode),
                    _ => return None,
                }
            }
            Some(sign * sum / n_pairs)
        })
        .collect()
}

pub fn total_angle(
    seq: &SkeletonSequence,
    pairs: &JointPairSet,
    mode: StepMode,
) -> Result<TurnEstimate> {
    let t = seq.len();
    if t < 2 {
        return Err(GeometryError::TooShort(t));
    }
    let steps = transition_steps(seq, pairs, mode);
    let skipped = steps.iter().filter(|s| s.is_none()).count();
    if skipped == steps.len() {
        return Err(GeometryError::NoUsableTransition);
    }
    let steps_deg: Vec<f64> = steps.into_iter().map(|s| s.unwrap_or(0.0)).collect();
    let sum: f64 = steps_deg.iter().sum();
    let theta_deg = match mode {
        StepMode::UnsignedArcsin => sum,
        StepMode::SignedAtan2 => sum.abs(),
    };
    // theta / ((T-1)/fps), ordered so a single transition gives exactly w_max
    let omega_deg_s = theta_deg * seq.fps() / (t - 1) as f64;
    let w_max_deg_s = max_angular_velocity(&steps_deg, seq.fps())?;
    Ok(TurnEstimate {
        theta_deg,
        omega_deg_s,
        w_max_deg_s,
        steps_deg,
        skipped_transitions: skipped,
        pair_set: pairs.clone(),
        mode,
    })
}

/// Largest per-frame rotation rate, `max |step| * fps`, in degrees/second.
pub fn max_angular_velocity(steps_deg: &[f64], fps: f64) -> Result<f64> {
    steps_deg
        .iter()
        .map(|s| s.abs())
        .reduce(f64::max)
        .map(|m| m * fps)
        .ok_or(GeometryError::EmptySteps)
}

/// Angle between the body orientation at the first and at the last frame where
/// every selected pair is usable, averaged over pairs. Range [0, 180].
pub fn first_last_angle(seq: &SkeletonSequence, pairs: &JointPairSet) -> Result<f64> {
    let t = seq.len();
    if t < 2 {
        return Err(GeometryError::TooShort(t));
    }
    let series: Vec<_> = pairs.pairs().iter().map(|&p| pair_series(seq, p)).collect();
    let usable = |i: usize| series.iter().all(|s| s[i].is_some());
    let Some(first) = (0..t).find(|&i| usable(i)) else {
        return Err(endpoint_error(seq, pairs, 0));
    };
    let last = (0..t).rev().find(|&i| usable(i)).unwrap_or(first);
    let sum: f64 = series
        .iter()
        .map(|s| {
            let (a, b) = (s[first].unwrap(), s[last].unwrap());
            step_angle_unchecked(&a, &b, StepMode::SignedAtan2).abs()
        })
        .sum();
    Ok(sum / pairs.len() as f64)
}

fn endpoint_error(seq: &SkeletonSequence, pairs: &JointPairSet, frame: usize) -> GeometryError {
    for &p in pairs.pairs() {
        match pair_vector(&seq.frames[frame], frame, p, seq.up_axis) {
            Err(e) => return e,
            Ok(v) => {
                let series = pair_series(seq, p);
                if series[frame].is_none() {
                    return GeometryError::DegenerateVector {
                        frame,
                        pair: p,
                        norm: v.norm(),
                    };
                }
            }
        }
    }
    GeometryError::NoUsableTransition
}
