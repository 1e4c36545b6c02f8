//! Segmentation of untrimmed sequences into turning episodes.
//!
//! Pair vectors are smoothed with a centred moving average, signed frame to
//! frame rotation is computed on the smoothed series, and a scan opens an
//! episode when the rotation rate exceeds a gate. The episode keeps growing
//! while rotation continues in the same direction, tolerating short pauses
//! and small counter-rotations, and is kept only if its net rotation reaches
//! `min_turn_deg`.

use thiserror::Error;

use crate::geometry::{
    degeneracy_floor, pair_series, step_angle_unchecked, BodyVector, GeometryError, JointPairSet,
    StepMode, TurnDirection,
};
use crate::skeleton::SkeletonSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("sequence too short: {0} frames, need at least 2")]
    TooShort(usize),
    #[error("invalid detection config: {0}")]
    Config(String),
    #[error("episode [{start}, {end}) out of range for {len} frames")]
    OutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = DetectError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub min_turn_deg: f64,
    pub pairs: JointPairSet,
    /// Odd width of the centred moving average.
    pub smooth_window_frames: usize,
    pub min_rate_deg_s: f64,
    pub max_gap_frames: usize,
    pub reversal_tolerance_deg: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            min_turn_deg: 45.0,
            pairs: JointPairSet::hip(),
            smooth_window_frames: 5,
            min_rate_deg_s: 5.0,
            max_gap_frames: 10,
            reversal_tolerance_deg: 10.0,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DetectError::Config(m.to_string()));
        if !(self.min_turn_deg.is_finite() && self.min_turn_deg > 0.0) {
            return bad("min_turn_deg must be > 0");
        }
        if self.smooth_window_frames == 0 || self.smooth_window_frames.is_multiple_of(2) {
            return bad("smooth_window_frames must be odd and > 0");
        }
        if !(self.min_rate_deg_s.is_finite() && self.min_rate_deg_s > 0.0) {
            return bad("min_rate_deg_s must be > 0");
        }
        if self.max_gap_frames == 0 {
            return bad("max_gap_frames must be > 0");
        }
        if !(self.reversal_tolerance_deg.is_finite() && self.reversal_tolerance_deg > 0.0) {
            return bad("reversal_tolerance_deg must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnEpisode {
    /// Position of the episode within its sequence, from 0.
    pub index: usize,
    pub start_frame: usize,
    /// Exclusive.
    pub end_frame: usize,
    /// Magnitude of the net signed rotation.
    pub accumulated_deg: f64,
    pub direction: TurnDirection,
    pub mean_rate_deg_s: f64,
}

impl TurnEpisode {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Centred moving average of vector components, ignoring missing entries.
fn smooth(series: &[Option<BodyVector>], window: usize) -> Vec<Option<BodyVector>> {
    let half = window / 2;
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let (mut x, mut y, mut k) = (0.0, 0.0, 0usize);
            let mut pair = None;
            for v in series[lo..hi].iter().flatten() {
                x += v.x;
                y += v.y;
                k += 1;
                pair = Some(v.pair);
            }
            pair.map(|p| BodyVector::new(x / k as f64, y / k as f64, i, p))
        })
        .collect()
}

/// Signed per-transition rotation (ccw positive) of the smoothed pair vectors,
/// averaged over `cfg.pairs`.
pub fn smoothed_signed_steps(seq: &SkeletonSequence, cfg: &DetectConfig) -> Vec<Option<f64>> {
    let sign = seq.up_axis.handedness();
    let smoothed: Vec<Vec<Option<BodyVector>>> = cfg
        .pairs
        .pairs()
        .iter()
        .map(|&p| {
            let s = smooth(&pair_series(seq, p), cfg.smooth_window_frames);
            let floor = degeneracy_floor(&s);
            s.into_iter()
                .map(|v| v.filter(|v| v.norm().is_finite() && v.norm() >= floor))
                .collect()
        })
        .collect();
    let n_pairs = cfg.pairs.len() as f64;
    (0..seq.len().saturating_sub(1))
        .map(|t| {
            let mut sum = 0.0;
            for s in &smoothed {
                let (Some(a), Some(b)) = (&s[t], &s[t + 1]) else {
                    return None;
                };
                sum += step_angle_unchecked(a, b, StepMode::SignedAtan2);
            }
            Some(sign * sum / n_pairs)
        })
        .collect()
}

pub fn detect_turns(seq: &SkeletonSequence, cfg: &DetectConfig) -> Result<Vec<TurnEpisode>> {
    cfg.validate()?;
    if seq.len() < 2 {
        return Err(DetectError::TooShort(seq.len()));
    }
    let steps = smoothed_signed_steps(seq, cfg);
    let n = steps.len();
    let gate = cfg.min_rate_deg_s / seq.fps();
    let mut episodes = Vec::new();

    let mut t = 0;
    while t < n {
        let s = steps[t].unwrap_or(0.0);
        if s.abs() <= gate {
            t += 1;
            continue;
        }
        let dir = s.signum();
        let start = t;
        let mut last_active = t;
        let mut progress = 0.0;
        let mut peak = 0.0f64;
        let mut gap = 0;
        for (u, step) in steps.iter().enumerate().skip(t) {
            let p = dir * step.unwrap_or(0.0);
            progress += p;
            if p > gate {
                last_active = u;
                gap = 0;
            } else {
                gap += 1;
                if peak - progress > cfg.reversal_tolerance_deg || gap > cfg.max_gap_frames {
                    break;
                }
            }
            peak = peak.max(progress);
        }

        let net: f64 = steps[start..=last_active].iter().flatten().sum();
        if net.abs() >= cfg.min_turn_deg {
            let end = last_active + 2;
            let span_s = (end - start - 1) as f64 / seq.fps();
            episodes.push(TurnEpisode {
                index: episodes.len(),
                start_frame: start,
                end_frame: end,
                accumulated_deg: net.abs(),
                direction: TurnDirection::from_signed(net),
                mean_rate_deg_s: net.abs() / span_s,
            });
            // the next episode may not share the closing frame
            t = end;
        } else {
            t = last_active + 1;
        }
    }
    Ok(episodes)
}

/// Frames `[start, end)` of `seq` as a new clip named `<clip_id>_epNN`, numbered from 1.
pub fn trim_episode(seq: &SkeletonSequence, ep: &TurnEpisode) -> Result<SkeletonSequence> {
    if ep.start_frame >= ep.end_frame || ep.end_frame > seq.len() {
        return Err(DetectError::OutOfRange {
            start: ep.start_frame,
            end: ep.end_frame,
            len: seq.len(),
        });
    }
    let mut out = seq.clone();
    out.clip_id = format!("{}_ep{:02}", seq.clip_id, ep.index + 1);
    out.frames = seq.frames[ep.start_frame..ep.end_frame].to_vec();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::total_angle;
    use crate::synth::{
        generate_plan, generate_turn, BodyParams, RateProfile, Segment, SynthParams,
    };

    fn walk(s: f64) -> Segment {
        Segment::Walk { duration_s: s }
    }

    fn turn(deg: f64, s: f64) -> Segment {
        Segment::Turn {
            angle_deg: deg,
            duration_s: s,
            profile: RateProfile::Constant,
        }
    }

    #[test]
    fn straight_walk_has_no_turns() {
        let (seq, _) = generate_plan("w", &BodyParams::default(), &[walk(5.0)]).unwrap();
        assert!(detect_turns(&seq, &DetectConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_ninety_degree_turn() {
        let (seq, truth) = generate_turn("t", &SynthParams::default()).unwrap();
        let eps = detect_turns(&seq, &DetectConfig::default()).unwrap();
        assert_eq!(eps.len(), 1, "{eps:?}");
        let ep = &eps[0];
        let gt = &truth.turns[0];
        assert!((85.0..=95.0).contains(&ep.accumulated_deg), "{ep:?}");
        assert_eq!(ep.direction, TurnDirection::Ccw);
        let w = 5;
        assert!(
            ep.start_frame.abs_diff(gt.start_frame) <= w,
            "{ep:?} vs {gt:?}"
        );
        assert!(ep.end_frame.abs_diff(gt.end_frame) <= w, "{ep:?} vs {gt:?}");
    }

    #[test]
    fn sub_threshold_wiggle_is_ignored() {
        let mut plan = vec![walk(1.0)];
        for _ in 0..4 {
            plan.extend([turn(30.0, 0.5), walk(0.2), turn(-30.0, 0.5), walk(0.2)]);
        }
        plan.push(walk(1.0));
        let (seq, _) = generate_plan("wig", &BodyParams::default(), &plan).unwrap();
        assert!(detect_turns(&seq, &DetectConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn two_turns_opposite_directions() {
        let plan = [
            walk(1.0),
            turn(180.0, 2.0),
            walk(3.0),
            turn(-90.0, 1.5),
            walk(1.0),
        ];
        let (seq, _) = generate_plan("two", &BodyParams::default(), &plan).unwrap();
        let eps = detect_turns(&seq, &DetectConfig::default()).unwrap();
        assert_eq!(eps.len(), 2, "{eps:?}");
        assert_eq!(eps[0].direction, TurnDirection::Ccw);
        assert_eq!(eps[1].direction, TurnDirection::Cw);
        assert!((eps[0].accumulated_deg - 180.0).abs() < 5.0);
        assert!((eps[1].accumulated_deg - 90.0).abs() < 5.0);
        assert!(eps[0].end_frame <= eps[1].start_frame);
        assert_eq!((eps[0].index, eps[1].index), (0, 1));
    }

    #[test]
    fn raising_threshold_never_adds_episodes() {
        let plan = [
            walk(1.0),
            turn(60.0, 1.0),
            walk(1.5),
            turn(120.0, 1.5),
            walk(1.0),
        ];
        let (seq, _) = generate_plan("m", &BodyParams::default(), &plan).unwrap();
        let mut last = usize::MAX;
        for min_turn in [20.0, 45.0, 70.0, 100.0, 150.0] {
            let cfg = DetectConfig {
                min_turn_deg: min_turn,
                ..DetectConfig::default()
            };
            let n = detect_turns(&seq, &cfg).unwrap().len();
            assert!(n <= last);
            last = n;
        }
        assert_eq!(last, 0);
    }

    #[test]
    fn trimmed_episodes_are_self_consistent() {
        let plan = [
            walk(1.0),
            turn(135.0, 1.5),
            walk(2.0),
            turn(-75.0, 1.0),
            walk(1.0),
        ];
        let (seq, _) = generate_plan("s", &BodyParams::default(), &plan).unwrap();
        let cfg = DetectConfig::default();
        for ep in detect_turns(&seq, &cfg).unwrap() {
            let clip = trim_episode(&seq, &ep).unwrap();
            let est = total_angle(&clip, &cfg.pairs, StepMode::SignedAtan2).unwrap();
            assert!(est.theta_deg >= cfg.min_turn_deg - cfg.reversal_tolerance_deg);
        }
    }

    #[test]
    fn trim_bounds() {
        let (seq, _) = generate_plan("b", &BodyParams::default(), &[walk(99.0 / 30.0)]).unwrap();
        assert_eq!(seq.len(), 100);
        let ep = |s, e| TurnEpisode {
            index: 3,
            start_frame: s,
            end_frame: e,
            accumulated_deg: 90.0,
            direction: TurnDirection::Ccw,
            mean_rate_deg_s: 1.0,
        };
        let clip = trim_episode(&seq, &ep(10, 40)).unwrap();
        assert_eq!(clip.len(), 30);
        assert_eq!(clip.clip_id, "b_ep04");
        assert_eq!(clip.frames[0], seq.frames[10]);
        assert_eq!(trim_episode(&seq, &ep(0, 100)).unwrap().frames, seq.frames);
        assert!(matches!(
            trim_episode(&seq, &ep(90, 120)),
            Err(DetectError::OutOfRange { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let even = DetectConfig {
            smooth_window_frames: 4,
            ..DetectConfig::default()
        };
        assert!(matches!(even.validate(), Err(DetectError::Config(_))));
        let (seq, _) = generate_plan("x", &BodyParams::default(), &[]).unwrap();
        assert_eq!(
            detect_turns(&seq, &DetectConfig::default()),
            Err(DetectError::TooShort(1))
        );
    }
}
