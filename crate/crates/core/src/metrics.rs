//! 45° angle bins and evaluation of predicted turning angles against labels.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::skeleton::{Annotation, Group, Scenario};

pub const BIN_WIDTH_DEG: f64 = 45.0;
pub const MAX_BIN_DEG: u16 = 360;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid angle bin {0}: must be a multiple of 45 in [45, 360]")]
    InvalidBin(f64),
    #[error("angle must be finite and >= 0, got {0}")]
    InvalidAngle(f64),
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown group key `{0}`")]
    UnknownKey(String),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// A turning-angle label: a multiple of 45° between 45° and 360°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AngleBin(u16);

impl AngleBin {
    pub fn new(degrees: u16) -> Result<Self> {
        if degrees == 0 || !degrees.is_multiple_of(45) || degrees > MAX_BIN_DEG {
            return Err(MetricsError::InvalidBin(degrees as f64));
        }
        Ok(Self(degrees))
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        if degrees.fract() != 0.0 || !(45.0..=360.0).contains(&degrees) {
            return Err(MetricsError::InvalidBin(degrees));
        }
        Self::new(degrees as u16).map_err(|_| MetricsError::InvalidBin(degrees))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn all() -> impl Iterator<Item = AngleBin> {
        (1..=8).map(|k| AngleBin(45 * k))
    }
}

impl fmt::Display for AngleBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of quantising a continuous angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    /// `None` when the angle is below half a bin (< 22.5°).
    pub bin: Option<AngleBin>,
    /// Set when the angle was at or above 382.5° and was clamped to 360°.
    pub clamped: bool,
}

/// Nearest 45° bin; exact midpoints go to the larger bin.
pub fn quantize_angle(theta_deg: f64) -> Result<Quantized> {
    if !theta_deg.is_finite() || theta_deg < 0.0 {
        return Err(MetricsError::InvalidAngle(theta_deg));
    }
    let mut k = (theta_deg / BIN_WIDTH_DEG).floor();
    let mut rem = theta_deg - k * BIN_WIDTH_DEG;
    if rem < 0.0 {
        k -= 1.0;
        rem += BIN_WIDTH_DEG;
    } else if rem >= BIN_WIDTH_DEG {
        k += 1.0;
        rem -= BIN_WIDTH_DEG;
    }
    if rem >= 0.5 * BIN_WIDTH_DEG {
        k += 1.0;
    }
    if k < 1.0 {
        return Ok(Quantized {
            bin: None,
            clamped: false,
        });
    }
    let clamped = k > 8.0;
    let k = k.min(8.0) as u16;
    Ok(Quantized {
        bin: Some(AngleBin(45 * k)),
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub clip_id: String,
    pub predicted_theta_deg: f64,
    pub predicted_bin: Option<AngleBin>,
    pub label_bin: AngleBin,
    pub scenario: Scenario,
    pub location: String,
    pub group: Group,
    pub subject_id: String,
}

impl EvalRecord {
    /// Quantises `predicted_theta_deg` and copies grouping attributes from `ann`.
    pub fn new(predicted_theta_deg: f64, ann: &Annotation) -> Result<Self> {
        let q = quantize_angle(predicted_theta_deg)?;
        Ok(Self {
            clip_id: ann.clip_id.clone(),
            predicted_theta_deg,
            predicted_bin: q.bin,
            label_bin: ann.label_bin,
            scenario: ann.scenario,
            location: ann.location.clone(),
            group: ann.group,
            subject_id: ann.subject_id.clone(),
        })
    }

    /// Record with no grouping attributes; mostly for tests.
    pub fn bare(predicted_theta_deg: f64, label_bin: AngleBin) -> Result<Self> {
        let q = quantize_angle(predicted_theta_deg)?;
        Ok(Self {
            clip_id: String::new(),
            predicted_theta_deg,
            predicted_bin: q.bin,
            label_bin,
            scenario: Scenario::Unknown,
            location: String::new(),
            group: Group::Unknown,
            subject_id: String::new(),
        })
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_bin == Some(self.label_bin)
    }
}

fn non_empty(records: &[EvalRecord]) -> Result<()> {
    if records.is_empty() {
        Err(MetricsError::Empty)
    } else {
        Ok(())
    }
}

/// Sum in ascending order so the result does not depend on record order.
fn ordered_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

pub fn bin_accuracy(records: &[EvalRecord]) -> Result<f64> {
    non_empty(records)?;
    let correct = records.iter().filter(|r| r.is_correct()).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Mean absolute difference between the continuous prediction and the label.
pub fn mae(records: &[EvalRecord]) -> Result<f64> {
    non_empty(records)?;
    let errs = records
        .iter()
        .map(|r| (r.predicted_theta_deg - r.label_bin.as_f64()).abs())
        .collect();
    Ok(ordered_sum(errs) / records.len() as f64)
}

/// Per-bin precision weighted by each bin's label support. A labelled bin that
/// is never predicted contributes precision 0.
pub fn weighted_precision(records: &[EvalRecord]) -> Result<f64> {
    non_empty(records)?;
    let mut support: BTreeMap<AngleBin, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<AngleBin, usize> = BTreeMap::new();
    let mut hits: BTreeMap<AngleBin, usize> = BTreeMap::new();
    for r in records {
        *support.entry(r.label_bin).or_default() += 1;
        if let Some(p) = r.predicted_bin {
            *predicted.entry(p).or_default() += 1;
            if p == r.label_bin {
                *hits.entry(p).or_default() += 1;
            }
        }
    }
    let n = records.len() as f64;
    let terms = support
        .iter()
        .map(|(bin, &n_b)| {
            let tp = hits.get(bin).copied().unwrap_or(0);
            let pp = predicted.get(bin).copied().unwrap_or(0);
            let precision = if pp == 0 { 0.0 } else { tp as f64 / pp as f64 };
            n_b as f64 / n * precision
        })
        .collect();
    Ok(ordered_sum(terms))
}

/// Chance-corrected agreement between two raters.
pub fn cohens_kappa(rater_a: &[AngleBin], rater_b: &[AngleBin]) -> Result<f64> {
    if rater_a.len() != rater_b.len() {
        return Err(MetricsError::LengthMismatch(rater_a.len(), rater_b.len()));
    }
    if rater_a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = rater_a.len() as f64;
    let mut marg_a: BTreeMap<AngleBin, usize> = BTreeMap::new();
    let mut marg_b: BTreeMap<AngleBin, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (&a, &b) in rater_a.iter().zip(rater_b) {
        *marg_a.entry(a).or_default() += 1;
        *marg_b.entry(b).or_default() += 1;
        agree += usize::from(a == b);
    }
    if agree == rater_a.len() {
        return Ok(1.0);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marg_a
        .iter()
        .map(|(bin, &ca)| {
            let cb = marg_b.get(bin).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    Scenario,
    Location,
    Group,
    LabelBin,
    SubjectId,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Scenario => "scenario",
            GroupKey::Location => "location",
            GroupKey::Group => "group",
            GroupKey::LabelBin => "label_bin",
            GroupKey::SubjectId => "subject_id",
        }
    }

    fn value(self, r: &EvalRecord) -> String {
        match self {
            GroupKey::Scenario => r.scenario.as_str().to_string(),
            GroupKey::Location => r.location.clone(),
            GroupKey::Group => r.group.as_str().to_string(),
            GroupKey::LabelBin => r.label_bin.to_string(),
            GroupKey::SubjectId => r.subject_id.clone(),
        }
    }
}

impl FromStr for GroupKey {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scenario" | "activity" => Ok(GroupKey::Scenario),
            "location" => Ok(GroupKey::Location),
            "group" | "condition" => Ok(GroupKey::Group),
            "label_bin" | "label" | "angle" => Ok(GroupKey::LabelBin),
            "subject_id" | "subject" => Ok(GroupKey::SubjectId),
            other => Err(MetricsError::UnknownKey(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub group: String,
    pub n_turns: usize,
    pub accuracy: f64,
    pub mae_deg: f64,
    pub wprec: f64,
}

impl EvalRow {
    fn compute(group: String, records: &[EvalRecord]) -> Result<Self> {
        Ok(Self {
            group,
            n_turns: records.len(),
            accuracy: bin_accuracy(records)?,
            mae_deg: mae(records)?,
            wprec: weighted_precision(records)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub key: GroupKey,
    pub rows: Vec<EvalRow>,
    /// Unweighted mean of the per-group rows; `n_turns` is the total.
    pub average: EvalRow,
    /// Metrics over all records pooled.
    pub overall: EvalRow,
    pub sub_threshold: usize,
    pub clamped: usize,
}

/// Numeric group names sort numerically, everything else lexically.
fn group_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

pub fn grouped_eval(records: &[EvalRecord], key: GroupKey) -> Result<EvalReport> {
    non_empty(records)?;
    let mut parts: Vec<(String, Vec<EvalRecord>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let k = key.value(r);
        let slot = *index.entry(k.clone()).or_insert_with(|| {
            parts.push((k, Vec::new()));
            parts.len() - 1
        });
        parts[slot].1.push(r.clone());
    }
    parts.sort_by(|a, b| group_order(&a.0, &b.0));

    let rows = parts
        .into_iter()
        .map(|(g, recs)| EvalRow::compute(g, &recs))
        .collect::<Result<Vec<_>>>()?;
    let m = rows.len() as f64;
    let average = EvalRow {
        group: "avg".into(),
        n_turns: records.len(),
        accuracy: ordered_sum(rows.iter().map(|r| r.accuracy).collect()) / m,
        mae_deg: ordered_sum(rows.iter().map(|r| r.mae_deg).collect()) / m,
        wprec: ordered_sum(rows.iter().map(|r| r.wprec).collect()) / m,
    };
    let overall = EvalRow::compute("all".into(), records)?;
    let sub_threshold = records.iter().filter(|r| r.predicted_bin.is_none()).count();
    let clamped = records
        .iter()
        .filter(|r| r.predicted_theta_deg >= 382.5)
        .count();
    Ok(EvalReport {
        key,
        rows,
        average,
        overall,
        sub_threshold,
        clamped,
    })
}

/// One row per label bin: how predictions are distributed for that label.
#[derive(Debug, Clone, PartialEq)]
pub struct BinDistributionRow {
    pub label_bin: AngleBin,
    pub n: usize,
    pub mean_pred_deg: f64,
    pub sd_pred_deg: f64,
    pub sub_threshold: usize,
    /// Count of predictions in each bin 45..=360.
    pub predicted_counts: [usize; 8],
}

pub fn bin_distribution(records: &[EvalRecord]) -> Vec<BinDistributionRow> {
    let mut by_label: BTreeMap<AngleBin, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_label.entry(r.label_bin).or_default().push(r);
    }
    by_label
        .into_iter()
        .map(|(label_bin, recs)| {
            let n = recs.len();
            let preds: Vec<f64> = recs.iter().map(|r| r.predicted_theta_deg).collect();
            let mean = ordered_sum(preds.clone()) / n as f64;
            let sd = if n > 1 {
                let ss = ordered_sum(preds.iter().map(|p| (p - mean).powi(2)).collect());
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let mut predicted_counts = [0; 8];
            let mut sub_threshold = 0;
            for r in &recs {
                match r.predicted_bin {
                    Some(b) => predicted_counts[(b.degrees() / 45 - 1) as usize] += 1,
                    None => sub_threshold += 1,
                }
            }
            BinDistributionRow {
                label_bin,
                n,
                mean_pred_deg: mean,
                sd_pred_deg: sd,
                sub_threshold,
                predicted_counts,
            }
        })
        .collect()
}

/// Histogram of signed errors (prediction - label) with `width_deg` buckets.
/// Each entry is (lower edge, count); buckets are [lo, lo + width).
pub fn error_histogram(records: &[EvalRecord], width_deg: f64) -> Vec<(f64, usize)> {
    assert!(width_deg > 0.0);
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for r in records {
        let err = r.predicted_theta_deg - r.label_bin.as_f64();
        *counts.entry((err / width_deg).floor() as i64).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k as f64 * width_deg, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(d: u16) -> AngleBin {
        AngleBin::new(d).unwrap()
    }

    fn recs(preds: &[f64], labels: &[u16]) -> Vec<EvalRecord> {
        preds
            .iter()
            .zip(labels)
            .map(|(&p, &l)| EvalRecord::bare(p, bin(l)).unwrap())
            .collect()
    }

    fn q(theta: f64) -> Option<u16> {
        quantize_angle(theta).unwrap().bin.map(AngleBin::degrees)
    }

    #[test]
    fn angle_bin_validation() {
        assert!(AngleBin::new(0).is_err());
        assert!(AngleBin::new(100).is_err());
        assert!(AngleBin::new(405).is_err());
        assert!(AngleBin::from_degrees(90.5).is_err());
        assert_eq!(AngleBin::from_degrees(315.0).unwrap().degrees(), 315);
        assert_eq!(AngleBin::all().count(), 8);
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(q(100.0), Some(90));
        assert_eq!(q(112.5), Some(135));
        assert_eq!(q(112.4999), Some(90));
        assert_eq!(q(10.0), None);
        assert_eq!(q(22.5), Some(45));
        assert_eq!(q(22.499999), None);
        assert_eq!(q(178.2), Some(180));
        assert_eq!(q(0.0), None);
        let hi = quantize_angle(382.5).unwrap();
        assert_eq!(hi.bin, Some(bin(360)));
        assert!(hi.clamped);
        let edge = quantize_angle(382.4).unwrap();
        assert_eq!(edge.bin, Some(bin(360)));
        assert!(!edge.clamped);
        assert!(quantize_angle(f64::NAN).is_err());
        assert!(quantize_angle(-1.0).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert!(
            (bin_accuracy(&recs(&[90.0, 135.0, 180.0], &[90, 90, 180])).unwrap() - 2.0 / 3.0).abs()
                < 1e-15
        );
        assert_eq!(
            bin_accuracy(&recs(&[90.0, 135.0], &[90, 135])).unwrap(),
            1.0
        );
        assert_eq!(bin_accuracy(&recs(&[5.0], &[90])).unwrap(), 0.0);
        assert_eq!(bin_accuracy(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn mae_examples() {
        assert!((mae(&recs(&[100.0, 150.0], &[90, 135])).unwrap() - 12.5).abs() < 1e-12);
        assert_eq!(mae(&recs(&[90.0], &[90])).unwrap(), 0.0);
        assert!((mae(&recs(&[76.1], &[90])).unwrap() - 13.9).abs() < 1e-9);
        assert_eq!(mae(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn weighted_precision_examples() {
        let w = weighted_precision(&recs(&[90.0, 135.0, 135.0], &[90, 90, 135])).unwrap();
        assert!((w - 5.0 / 6.0).abs() < 1e-12, "{w}");
        assert_eq!(
            weighted_precision(&recs(&[90.0, 180.0], &[90, 180])).unwrap(),
            1.0
        );
        assert_eq!(
            weighted_precision(&recs(&[135.0, 135.0], &[90, 90])).unwrap(),
            0.0
        );
        assert_eq!(weighted_precision(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn kappa_examples() {
        let a = [bin(90), bin(90), bin(135), bin(180)];
        let b = [bin(90), bin(135), bin(135), bin(180)];
        assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
        let k = cohens_kappa(&a, &b).unwrap();
        assert!((k - 0.4375 / 0.6875).abs() < 1e-12, "{k}");
        assert_eq!(
            cohens_kappa(&a, &b[..3]),
            Err(MetricsError::LengthMismatch(4, 3))
        );
        assert_eq!(cohens_kappa(&[], &[]), Err(MetricsError::Empty));
        // complete disagreement with uniform marginals
        let k = cohens_kappa(&[bin(90), bin(180)], &[bin(180), bin(90)]).unwrap();
        assert!((k + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grouped_average_is_unweighted() {
        let mut records = recs(&[90.0, 90.0, 90.0, 90.0, 90.0], &[90, 90, 135, 135, 135]);
        for (i, r) in records.iter_mut().enumerate() {
            r.location = if i < 2 { "a".into() } else { "b".into() };
        }
        // a: 2/2 correct, b: 0/3 correct
        let rep = grouped_eval(&records, GroupKey::Location).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].accuracy, 1.0);
        assert_eq!(rep.rows[1].accuracy, 0.0);
        assert_eq!(rep.average.accuracy, 0.5);
        assert!((rep.overall.accuracy - 0.4).abs() < 1e-15);
        assert_eq!(rep.average.n_turns, 5);
        assert_eq!(rep.rows.iter().map(|r| r.n_turns).sum::<usize>(), 5);
    }

    #[test]
    fn grouped_single_group_matches_average() {
        let records = recs(&[100.0, 40.0, 170.0], &[90, 45, 180]);
        let rep = grouped_eval(&records, GroupKey::Scenario).unwrap();
        assert_eq!(rep.rows.len(), 1);
        let (row, avg) = (&rep.rows[0], &rep.average);
        assert_eq!(
            (row.accuracy, row.mae_deg, row.wprec),
            (avg.accuracy, avg.mae_deg, avg.wprec)
        );
    }

    #[test]
    fn label_bin_groups_sort_numerically() {
        let records = recs(&[45.0, 90.0, 360.0, 135.0], &[45, 90, 360, 135]);
        let rep = grouped_eval(&records, GroupKey::LabelBin).unwrap();
        let names: Vec<_> = rep.rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, ["45", "90", "135", "360"]);
        assert!(rep.rows.iter().all(|r| r.accuracy == 1.0));
    }

    #[test]
    fn distribution_and_histogram() {
        let records = recs(&[80.0, 100.0, 10.0, 140.0], &[90, 90, 90, 135]);
        let dist = bin_distribution(&records);
        assert_eq!(dist.len(), 2);
        assert_eq!(dist[0].n, 3);
        assert_eq!(dist[0].sub_threshold, 1);
        assert_eq!(dist[0].predicted_counts[1], 2);
        assert!((dist[0].mean_pred_deg - 190.0 / 3.0).abs() < 1e-12);
        let hist = error_histogram(&records, 10.0);
        assert_eq!(hist, vec![(-80.0, 1), (-10.0, 1), (0.0, 1), (10.0, 1)]);
    }
}
