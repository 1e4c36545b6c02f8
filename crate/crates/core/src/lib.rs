//! Turning-angle estimation from 3D skeleton sequences.
//!
//! - [`skeleton`]: joint model and file formats
//! - [`geometry`]: body vectors, per-frame rotation, turning angle and speeds
//! - [`metrics`]: 45° bins, accuracy / MAE / weighted precision / kappa
//! - [`detection`]: turn segmentation of untrimmed sequences
//! - [`stats`]: per-subject aggregation and two-sample t-tests
//! - [`synth`]: synthetic turns with exact groundtruth
//! - [`cli`]: the `turnangle` batch front end

pub mod cli;
pub mod detection;
pub mod fmt;
pub mod geometry;
pub mod metrics;
pub mod skeleton;
pub mod stats;
pub mod synth;

pub use detection::{detect_turns, trim_episode, DetectConfig, TurnEpisode};
pub use geometry::{
    first_last_angle, max_angular_velocity, total_angle, JointPair, JointPairSet, StepMode,
    TurnDirection, TurnEstimate,
};
pub use metrics::{quantize_angle, AngleBin, EvalRecord, EvalReport, GroupKey};
pub use skeleton::{
    load_annotations, load_sequence, save_sequence, Annotation, JointId, SkeletonFrame,
    SkeletonSequence, UpAxis,
};
pub use stats::{GroupStats, TTestResult};
