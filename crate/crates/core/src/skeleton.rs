//! Skeleton data model and the on-disk formats for sequences and annotations.
//!
//! A skeleton file holds one clip: a header line
//!
//! ```text
//! #turnskel v1 fps=30 up=z joints=17 clip=walk_01
//! ```
//!
//! followed by one line per frame with 51 whitespace-separated numbers
//! (x y z for each joint in [`JointId`] order). A missing joint is written as
//! `nan nan nan`. Coordinates are written with the shortest representation
//! that parses back to the same `f64`, so save/load is lossless.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AngleBin;

pub const NUM_JOINTS: usize = 17;

const MAGIC: &str = "#turnskel";
const VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: joint count mismatch: expected {expected} joints, found {found}")]
    JointCount {
        line: usize,
        expected: usize,
        found: String,
    },
    #[error("line {line}: joint {joint}: {msg}")]
    Value {
        line: usize,
        joint: &'static str,
        msg: String,
    },
    #[error("invalid fps {0}: must be finite and > 0")]
    Fps(f64),
    #[error("frame {frame}: joint {joint} has non-finite coordinates")]
    NonFinite { frame: usize, joint: &'static str },
    #[error("annotation record {record}: {msg}")]
    Annotation { record: usize, msg: String },
    #[error("annotation file: missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = SkeletonError> = std::result::Result<T, E>;

/// The 17 joints of the Human3.6M skeleton, in canonical file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JointId {
    Pelvis,
    RightHip,
    RightKnee,
    RightAnkle,
    LeftHip,
    LeftKnee,
    LeftAnkle,
    Spine,
    Thorax,
    Neck,
    Head,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
    RightShoulder,
    RightElbow,
    RightWrist,
}

impl JointId {
    pub const ALL: [JointId; NUM_JOINTS] = [
        JointId::Pelvis,
        JointId::RightHip,
        JointId::RightKnee,
        JointId::RightAnkle,
        JointId::LeftHip,
        JointId::LeftKnee,
        JointId::LeftAnkle,
        JointId::Spine,
        JointId::Thorax,
        JointId::Neck,
        JointId::Head,
        JointId::LeftShoulder,
        JointId::LeftElbow,
        JointId::LeftWrist,
        JointId::RightShoulder,
        JointId::RightElbow,
        JointId::RightWrist,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<JointId> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::Pelvis => "pelvis",
            JointId::RightHip => "right_hip",
            JointId::RightKnee => "right_knee",
            JointId::RightAnkle => "right_ankle",
            JointId::LeftHip => "left_hip",
            JointId::LeftKnee => "left_knee",
            JointId::LeftAnkle => "left_ankle",
            JointId::Spine => "spine",
            JointId::Thorax => "thorax",
            JointId::Neck => "neck",
            JointId::Head => "head",
            JointId::LeftShoulder => "left_shoulder",
            JointId::LeftElbow => "left_elbow",
            JointId::LeftWrist => "left_wrist",
            JointId::RightShoulder => "right_shoulder",
            JointId::RightElbow => "right_elbow",
            JointId::RightWrist => "right_wrist",
        }
    }

    pub fn from_name(name: &str) -> Option<JointId> {
        Self::ALL.iter().copied().find(|j| j.name() == name)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which coordinate axis points up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    X,
    Y,
    Z,
}

impl UpAxis {
    /// Indices of the two horizontal components kept by ground projection.
    pub fn ground_indices(self) -> (usize, usize) {
        match self {
            UpAxis::X => (1, 2),
            UpAxis::Y => (0, 2),
            UpAxis::Z => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        match self {
            UpAxis::X => 0,
            UpAxis::Y => 1,
            UpAxis::Z => 2,
        }
    }

    /// +1 when the projected pair `ground_indices()` is right-handed viewed
    /// from above, -1 otherwise. (x, z) under y-up is the mirrored case.
    pub fn handedness(self) -> f64 {
        match self {
            UpAxis::Y => -1.0,
            UpAxis::X | UpAxis::Z => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UpAxis::X => "x",
            UpAxis::Y => "y",
            UpAxis::Z => "z",
        }
    }
}

impl FromStr for UpAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(UpAxis::X),
            "y" => Ok(UpAxis::Y),
            "z" => Ok(UpAxis::Z),
            other => Err(format!("unknown up axis `{other}` (expected x, y or z)")),
        }
    }
}

impl fmt::Display for UpAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pose: a position per joint, or `None` where the joint is missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonFrame {
    joints: [Option<[f64; 3]>; NUM_JOINTS],
}

impl SkeletonFrame {
    /// Fails if any present joint has a non-finite component.
    pub fn new(joints: [Option<[f64; 3]>; NUM_JOINTS]) -> Result<Self, JointId> {
        for (i, j) in joints.iter().enumerate() {
            if let Some(p) = j {
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(JointId::ALL[i]);
                }
            }
        }
        Ok(Self { joints })
    }

    pub fn empty() -> Self {
        Self {
            joints: [None; NUM_JOINTS],
        }
    }

    pub fn joint(&self, id: JointId) -> Option<[f64; 3]> {
        self.joints[id.index()]
    }

    pub fn joints(&self) -> &[Option<[f64; 3]>; NUM_JOINTS] {
        &self.joints
    }

    /// Panics if `pos` has a non-finite component.
    pub fn set(&mut self, id: JointId, pos: Option<[f64; 3]>) {
        if let Some(p) = pos {
            assert!(p.iter().all(|c| c.is_finite()), "non-finite joint position");
        }
        self.joints[id.index()] = pos;
    }

    pub fn missing_count(&self) -> usize {
        self.joints.iter().filter(|j| j.is_none()).count()
    }

    /// Applies `f` to every present joint.
    pub fn map_present(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = *self;
        for j in out.joints.iter_mut().flatten() {
            *j = f(*j);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub clip_id: String,
    fps: f64,
    pub up_axis: UpAxis,
    pub frames: Vec<SkeletonFrame>,
}

impl SkeletonSequence {
    pub fn new(
        clip_id: impl Into<String>,
        fps: f64,
        up_axis: UpAxis,
        frames: Vec<SkeletonFrame>,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(SkeletonError::Fps(fps));
        }
        Ok(Self {
            clip_id: clip_id.into(),
            fps,
            up_axis,
            frames,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    /// Duration spanned by the frames, `(T - 1) / fps`.
    pub fn duration_s(&self) -> f64 {
        self.frames.len().saturating_sub(1) as f64 / self.fps
    }
}

pub fn parse_sequence(reader: impl BufRead) -> Result<SkeletonSequence> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(SkeletonError::Header {
                    line: 1,
                    msg: "empty file".into(),
                })
            }
        }
    };
    let (fps, up_axis, clip_id) = parse_header(&header)?;
    let mut frames = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(parse_frame_line(&line, lineno)?);
    }
    SkeletonSequence::new(clip_id, fps, up_axis, frames)
}

fn parse_header(line: &str) -> Result<(f64, UpAxis, String)> {
    let err = |msg: String| SkeletonError::Header { line: 1, msg };
    let line = line.trim_end();
    let mut rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| err(format!("expected `{MAGIC}` magic")))?
        .trim_start();
    let version = rest.split_whitespace().next().unwrap_or("");
    if version != VERSION {
        return Err(err(format!("unsupported version `{version}`")));
    }
    rest = rest[version.len()..].trim_start();

    let mut fps = None;
    let mut up = None;
    let mut joints = None;
    let mut clip = None;
    while !rest.is_empty() {
        // clip= swallows the remainder of the line
        if let Some(id) = rest.strip_prefix("clip=") {
            clip = Some(id.to_string());
            break;
        }
        let token = rest.split_whitespace().next().unwrap_or("");
        rest = rest[token.len()..].trim_start();
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got `{token}`")))?;
        match key {
            "fps" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| err(format!("bad fps `{value}`")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(err(format!("fps must be finite and > 0, got {value}")));
                }
                fps = Some(v);
            }
            "up" => up = Some(value.parse::<UpAxis>().map_err(err)?),
            "joints" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| err(format!("bad joints `{value}`")))?;
                if n != NUM_JOINTS {
                    return Err(SkeletonError::JointCount {
                        line: 1,
                        expected: NUM_JOINTS,
                        found: n.to_string(),
                    });
                }
                joints = Some(n);
            }
            other => return Err(err(format!("unknown header field `{other}`"))),
        }
    }
    let fps = fps.ok_or_else(|| err("missing fps".into()))?;
    let up = up.ok_or_else(|| err("missing up".into()))?;
    joints.ok_or_else(|| err("missing joints".into()))?;
    let clip = clip.ok_or_else(|| err("missing clip".into()))?;
    Ok((fps, up, clip))
}

fn parse_frame_line(line: &str, lineno: usize) -> Result<SkeletonFrame> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != NUM_JOINTS * 3 {
        return Err(SkeletonError::JointCount {
            line: lineno,
            expected: NUM_JOINTS,
            found: if tokens.len().is_multiple_of(3) {
                (tokens.len() / 3).to_string()
            } else {
                format!("{} values", tokens.len())
            },
        });
    }
    let mut frame = SkeletonFrame::empty();
    for (j, chunk) in tokens.chunks(3).enumerate() {
        let joint = JointId::ALL[j];
        let mut xyz = [0.0; 3];
        for (c, tok) in chunk.iter().enumerate() {
            xyz[c] = tok.parse::<f64>().map_err(|_| SkeletonError::Value {
                line: lineno,
                joint: joint.name(),
                msg: format!("cannot parse `{tok}`"),
            })?;
        }
        let nan = xyz.iter().filter(|v| v.is_nan()).count();
        match nan {
            3 => frame.joints[j] = None,
            0 if xyz.iter().all(|v| v.is_finite()) => frame.joints[j] = Some(xyz),
            0 => {
                return Err(SkeletonError::Value {
                    line: lineno,
                    joint: joint.name(),
                    msg: "non-finite value not marked missing".into(),
                })
            }
            _ => {
                return Err(SkeletonError::Value {
                    line: lineno,
                    joint: joint.name(),
                    msg: "partially missing coordinates".into(),
                })
            }
        }
    }
    Ok(frame)
}

pub fn write_sequence(seq: &SkeletonSequence, mut w: impl Write) -> io::Result<()> {
    writeln!(
        w,
        "{MAGIC} {VERSION} fps={} up={} joints={NUM_JOINTS} clip={}",
        seq.fps, seq.up_axis, seq.clip_id
    )?;
    let mut line = String::with_capacity(NUM_JOINTS * 3 * 12);
    for frame in &seq.frames {
        line.clear();
        for (j, joint) in frame.joints.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            match joint {
                Some([x, y, z]) => {
                    use std::fmt::Write as _;
                    let _ = write!(line, "{x} {y} {z}");
                }
                None => line.push_str("nan nan nan"),
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn load_sequence(path: impl AsRef<Path>) -> Result<SkeletonSequence> {
    let file = fs::File::open(path)?;
    parse_sequence(BufReader::new(file))
}

pub fn save_sequence(seq: &SkeletonSequence, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_sequence(seq, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    LooselyScripted,
    Clinical,
    FreeLiving,
    Unknown,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::LooselyScripted => "loosely_scripted",
            Scenario::Clinical => "clinical",
            Scenario::FreeLiving => "free_living",
            Scenario::Unknown => "unknown",
        }
    }

    /// Returns `None` for unrecognised vocabulary.
    pub fn parse(s: &str) -> Option<Scenario> {
        match normalize(s).as_str() {
            "loosely_scripted" => Some(Scenario::LooselyScripted),
            "clinical" => Some(Scenario::Clinical),
            "free_living" => Some(Scenario::FreeLiving),
            "unknown" => Some(Scenario::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "PD", alias = "pd")]
    Pd,
    #[serde(rename = "control", alias = "C")]
    Control,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Pd => "PD",
            Group::Control => "control",
            Group::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        match normalize(s).as_str() {
            "pd" => Some(Group::Pd),
            "control" | "c" => Some(Group::Control),
            "unknown" => Some(Group::Unknown),
            _ => None,
        }
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace(['-', ' '], "_")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub clip_id: String,
    pub label_bin: AngleBin,
    pub duration_s: f64,
    pub scenario: Scenario,
    pub location: String,
    pub subject_id: String,
    pub group: Group,
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationSet {
    pub annotations: Vec<Annotation>,
    /// Count of scenario/group values that were not in the vocabulary and
    /// were mapped to `unknown`.
    pub unknown_values: usize,
}

pub const ANNOTATION_COLUMNS: [&str; 7] = [
    "clip_id",
    "label_deg",
    "duration_s",
    "scenario",
    "location",
    "subject_id",
    "group",
];

pub fn parse_annotations(reader: impl io::Read) -> Result<AnnotationSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(ANNOTATION_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(SkeletonError::MissingColumn(name))?;
    }
    let mut set = AnnotationSet::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let record = i + 1;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let bad = |msg: String| SkeletonError::Annotation { record, msg };

        let label: f64 = field(1)
            .parse()
            .map_err(|_| bad(format!("bad label `{}`", field(1))))?;
        let label_bin = AngleBin::from_degrees(label)
            .map_err(|_| bad(format!("label not a 45° multiple: {}", field(1))))?;
        let duration_s: f64 = field(2)
            .parse()
            .map_err(|_| bad(format!("bad duration `{}`", field(2))))?;
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(bad(format!("non-positive duration: {}", field(2))));
        }
        let scenario = Scenario::parse(field(3)).unwrap_or_else(|| {
            set.unknown_values += 1;
            Scenario::Unknown
        });
        let group = Group::parse(field(6)).unwrap_or_else(|| {
            set.unknown_values += 1;
            Group::Unknown
        });
        set.annotations.push(Annotation {
            clip_id: field(0).to_string(),
            label_bin,
            duration_s,
            scenario,
            location: field(4).to_string(),
            subject_id: field(5).to_string(),
            group,
        });
    }
    Ok(set)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    parse_annotations(fs::File::open(path)?)
}

pub fn write_annotations(annotations: &[Annotation], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", ANNOTATION_COLUMNS.join(","))?;
    for a in annotations {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            a.clip_id,
            a.label_bin.degrees(),
            a.duration_s,
            a.scenario.as_str(),
            a.location,
            a.subject_id,
            a.group.as_str()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(offset: f64) -> SkeletonFrame {
        let mut joints = [None; NUM_JOINTS];
        for (i, j) in joints.iter_mut().enumerate() {
            *j = Some([i as f64 + offset, -(i as f64) * 0.1, 1.0 / 3.0 + offset]);
        }
        SkeletonFrame::new(joints).unwrap()
    }

    fn roundtrip(seq: &SkeletonSequence) -> SkeletonSequence {
        let mut buf = Vec::new();
        write_sequence(seq, &mut buf).unwrap();
        parse_sequence(buf.as_slice()).unwrap()
    }

    #[test]
    fn joint_order_is_canonical() {
        let names: Vec<_> = JointId::ALL.iter().map(|j| j.name()).collect();
        assert_eq!(
            names,
            [
                "pelvis",
                "right_hip",
                "right_knee",
                "right_ankle",
                "left_hip",
                "left_knee",
                "left_ankle",
                "spine",
                "thorax",
                "neck",
                "head",
                "left_shoulder",
                "left_elbow",
                "left_wrist",
                "right_shoulder",
                "right_elbow",
                "right_wrist"
            ]
        );
        for (i, j) in JointId::ALL.iter().enumerate() {
            assert_eq!(j.index(), i);
            assert_eq!(JointId::from_index(i), Some(*j));
            assert_eq!(JointId::from_name(j.name()), Some(*j));
        }
        assert_eq!(JointId::from_index(17), None);
    }

    #[test]
    fn two_frame_file_loads() {
        let seq = SkeletonSequence::new(
            "c1",
            30.0,
            UpAxis::Z,
            vec![frame_with(0.0), frame_with(1.0)],
        )
        .unwrap();
        let back = roundtrip(&seq);
        assert_eq!(back.len(), 2);
        assert_eq!(back.fps(), 30.0);
        assert_eq!(back, seq);
    }

    #[test]
    fn sixteen_joints_is_rejected() {
        let mut text = String::from("#turnskel v1 fps=30 up=z joints=17 clip=a\n");
        text.push_str(&vec!["1.0"; 48].join(" "));
        text.push('\n');
        let err = parse_sequence(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("joint count mismatch"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn nan_marks_missing_joint() {
        let mut frames = vec![frame_with(0.0); 6];
        frames[5].set(JointId::LeftHip, None);
        let seq = SkeletonSequence::new("m", 25.0, UpAxis::Y, frames).unwrap();
        let back = roundtrip(&seq);
        assert_eq!(back.frames[5].joint(JointId::LeftHip), None);
        assert_eq!(back.frames[5].missing_count(), 1);
        assert_eq!(back, seq);
    }

    #[test]
    fn empty_sequence_roundtrips() {
        let seq = SkeletonSequence::new("empty", 50.0, UpAxis::X, vec![]).unwrap();
        let back = roundtrip(&seq);
        assert!(back.is_empty());
        assert_eq!(back, seq);
    }

    #[test]
    fn clip_id_may_contain_spaces() {
        let seq = SkeletonSequence::new("subject 3 / take 2", 30.0, UpAxis::Z, vec![]).unwrap();
        assert_eq!(roundtrip(&seq).clip_id, "subject 3 / take 2");
    }

    #[test]
    fn header_errors() {
        for (text, needle) in [
            ("#turnskel v1 fps=0 up=z joints=17 clip=a\n", "fps"),
            ("#turnskel v1 fps=-3 up=z joints=17 clip=a\n", "fps"),
            ("#turnskel v1 fps=30 up=w joints=17 clip=a\n", "up axis"),
            (
                "#turnskel v1 fps=30 up=z joints=16 clip=a\n",
                "joint count mismatch",
            ),
            ("#turnskel v2 fps=30 up=z joints=17 clip=a\n", "version"),
            ("#skel v1 fps=30 up=z joints=17 clip=a\n", "magic"),
            ("#turnskel v1 up=z joints=17 clip=a\n", "missing fps"),
            ("", "empty"),
        ] {
            let err = parse_sequence(text.as_bytes()).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?} -> {err}");
        }
    }

    #[test]
    fn non_finite_and_partial_values_are_rejected() {
        let header = "#turnskel v1 fps=30 up=z joints=17 clip=a\n";
        let mut vals = vec!["0.5"; 51];
        vals[4] = "inf";
        let err = parse_sequence(format!("{header}{}\n", vals.join(" ")).as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("non-finite value not marked missing"), "{err}");
        assert!(err.contains("right_hip"), "{err}");

        let mut vals = vec!["0.5"; 51];
        vals[0] = "nan";
        let err = parse_sequence(format!("{header}{}\n", vals.join(" ")).as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("partially missing"), "{err}");
    }

    #[test]
    fn annotations_parse() {
        let text = "clip_id,label_deg,duration_s,scenario,location,subject_id,group\n\
                    clip7,180,2.350,clinical,hall,S3,PD\n\
                    clip8,90,1.2,dancing,kitchen,S4,ctrl\n";
        let set = parse_annotations(text.as_bytes()).unwrap();
        assert_eq!(set.annotations.len(), 2);
        let a = &set.annotations[0];
        assert_eq!(a.label_bin.degrees(), 180);
        assert_eq!(a.duration_s, 2.35);
        assert_eq!(a.scenario, Scenario::Clinical);
        assert_eq!(a.group, Group::Pd);
        assert_eq!(a.location, "hall");
        assert_eq!(set.annotations[1].scenario, Scenario::Unknown);
        assert_eq!(set.annotations[1].group, Group::Unknown);
        assert_eq!(set.unknown_values, 2);
    }

    #[test]
    fn annotation_errors() {
        let head = "clip_id,label_deg,duration_s,scenario,location,subject_id,group\n";
        let err = parse_annotations(format!("{head}c,100,1.0,clinical,hall,S1,PD\n").as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("label not a 45° multiple"), "{err}");
        let err = parse_annotations(format!("{head}c,90,0,clinical,hall,S1,PD\n").as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("non-positive duration"), "{err}");
        let err = parse_annotations("clip_id,label_deg\nc,90\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("missing required column"), "{err}");
    }

    #[test]
    fn annotations_roundtrip() {
        let text = "clip_id,label_deg,duration_s,scenario,location,subject_id,group\n\
                    a,135,0.75,free_living,bedroom,S1,control\n";
        let set = parse_annotations(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_annotations(&set.annotations, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }
}
