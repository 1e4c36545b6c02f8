//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 some clips failed, 2 usage or configuration
//! error, 3 nothing succeeded.

mod commands;
mod tables;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::detection::DetectConfig;
use crate::geometry::{JointPairSet, StepMode};
use crate::skeleton::UpAxis;

pub use tables::{read_results, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Partial = 1,
    Usage = 2,
    Failure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn from_counts(ok: usize, failed: usize) -> Self {
        match (ok, failed) {
            (_, 0) => ExitStatus::Success,
            (0, _) => ExitStatus::Failure,
            _ => ExitStatus::Partial,
        }
    }
}

/// Bad arguments or configuration; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Parser)]
#[command(
    name = "turnangle",
    version,
    about = "Turning angle estimation from 3D skeleton sequences"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Joint pairs to average, e.g. `hip,knee` (detect defaults to `hip`).
    #[arg(long, global = true)]
    pub pairs: Option<String>,
    /// Per-frame angle: `unsigned` (arcsin) or `signed` (atan2).
    #[arg(long, global = true, default_value = "unsigned")]
    pub mode: String,
    /// Override the up axis stored in skeleton files.
    #[arg(long, global = true)]
    pub up: Option<String>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turning angle, angular speed and peak angular velocity per clip.
    Angle {
        /// Skeleton files, or directories of `.skel` files.
        inputs: Vec<PathBuf>,
    },
    /// Segment untrimmed sequences into turning episodes.
    Detect {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 45.0)]
        min_turn: f64,
        #[arg(long, default_value_t = 5)]
        smooth_window: usize,
        #[arg(long, default_value_t = 5.0)]
        min_rate: f64,
        #[arg(long, default_value_t = 10)]
        max_gap: usize,
        #[arg(long, default_value_t = 10.0)]
        reversal_tol: f64,
        /// Write one skeleton file per episode under `<out>/clips`.
        #[arg(long)]
        emit_clips: bool,
    },
    /// Score per-clip angles against annotated bins.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Comma-separated keys: scenario, location, group, label_bin, subject_id.
        #[arg(long, default_value = "scenario,location,group")]
        group_by: String,
    },
    /// PD vs control comparison of per-subject means.
    Stats {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// `angle`, `w_max` or `both`.
        #[arg(long, default_value = "both")]
        measure: String,
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
        /// Welch's unequal-variance test instead of the pooled test.
        #[arg(long)]
        welch: bool,
    },
    /// Generate synthetic clips with groundtruth from a TOML parameter file.
    Synth {
        #[arg(long)]
        params: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pairs: JointPairSet,
    pub mode: StepMode,
    pub detect: DetectConfig,
    pub up_override: Option<UpAxis>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
}

impl RunConfig {
    fn from_args(common: &CommonArgs, default_pairs: JointPairSet) -> anyhow::Result<Self> {
        let pairs = match &common.pairs {
            Some(p) => match p.parse() {
                Ok(p) => p,
                Err(e) => return usage(format!("--pairs: {e}")),
            },
            None => default_pairs,
        };
        let mode = match common.mode.parse() {
            Ok(m) => m,
            Err(e) => return usage(format!("--mode: {e}")),
        };
        let up_override = match &common.up {
            Some(u) => match u.parse() {
                Ok(u) => Some(u),
                Err(e) => return usage(format!("--up: {e}")),
            },
            None => None,
        };
        if common.jobs == 0 {
            return usage("--jobs must be >= 1");
        }
        Ok(Self {
            detect: DetectConfig {
                pairs: pairs.clone(),
                ..DetectConfig::default()
            },
            pairs,
            mode,
            up_override,
            out: common.out.clone(),
            jobs: common.jobs,
            seed: common.seed,
        })
    }

    fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()?)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Success
            };
        }
    };
    match dispatch(&cli) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitStatus::Usage
            } else {
                ExitStatus::Failure
            }
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitStatus> {
    match &cli.command {
        Command::Angle { inputs } => {
            let cfg = RunConfig::from_args(&cli.common, JointPairSet::hip_knee())?;
            commands::cmd_angle(inputs, &cfg)
        }
        Command::Detect {
            inputs,
            min_turn,
            smooth_window,
            min_rate,
            max_gap,
            reversal_tol,
            emit_clips,
        } => {
            let mut cfg = RunConfig::from_args(&cli.common, JointPairSet::hip())?;
            cfg.detect = DetectConfig {
                min_turn_deg: *min_turn,
                pairs: cfg.pairs.clone(),
                smooth_window_frames: *smooth_window,
                min_rate_deg_s: *min_rate,
                max_gap_frames: *max_gap,
                reversal_tolerance_deg: *reversal_tol,
            };
            if let Err(e) = cfg.detect.validate() {
                return usage(e.to_string());
            }
            commands::cmd_detect(inputs, &cfg, *emit_clips)
        }
        Command::Eval {
            results,
            annotations,
            group_by,
        } => {
            let cfg = RunConfig::from_args(&cli.common, JointPairSet::hip_knee())?;
            commands::cmd_eval(results, annotations, group_by, &cfg)
        }
        Command::Stats {
            results,
            annotations,
            measure,
            ci_level,
            welch,
        } => {
            let cfg = RunConfig::from_args(&cli.common, JointPairSet::hip_knee())?;
            commands::cmd_stats(results, annotations, measure, *ci_level, *welch, &cfg)
        }
        Command::Synth { params } => {
            let cfg = RunConfig::from_args(&cli.common, JointPairSet::hip_knee())?;
            commands::cmd_synth(params, &cfg)
        }
    }
}
