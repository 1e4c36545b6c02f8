//! Cross-sectional group comparison: per-subject aggregation, summaries and
//! two-sample t-tests with Cohen's d and confidence intervals.
//!
//! The Student-t distribution is evaluated through the regularized incomplete
//! beta function, computed with a Lentz continued fraction.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::skeleton::Group;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("group `{group}` needs at least 2 values, got {n}")]
    TooFew { group: String, n: usize },
    #[error("subject `{0}` appears in more than one group")]
    InconsistentGroup(String),
    #[error("confidence level must be in (0, 1), got {0}")]
    Level(f64),
    #[error("non-finite value in group `{0}`")]
    NonFinite(String),
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectValue {
    pub subject_id: String,
    pub group: Group,
    pub value: f64,
}

impl SubjectValue {
    pub fn new(subject_id: impl Into<String>, group: Group, value: f64) -> Self {
        Self {
            subject_id: subject_id.into(),
            group,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMean {
    pub subject_id: String,
    pub group: Group,
    pub mean: f64,
    pub n: usize,
}

/// Collapses each subject's values to one mean, ordered by subject id.
pub fn per_subject_means(records: &[SubjectValue]) -> Result<Vec<SubjectMean>> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut by_subject: BTreeMap<&str, (Group, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let entry = by_subject
            .entry(&r.subject_id)
            .or_insert_with(|| (r.group, Vec::new()));
        if entry.0 != r.group {
            return Err(StatsError::InconsistentGroup(r.subject_id.clone()));
        }
        entry.1.push(r.value);
    }
    Ok(by_subject
        .into_iter()
        .map(|(id, (group, values))| SubjectMean {
            subject_id: id.to_string(),
            group,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            n: values.len(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub measure_name: String,
    pub group_name: String,
}

impl GroupStats {
    pub fn new(
        n: usize,
        mean: f64,
        sd: f64,
        group_name: impl Into<String>,
        measure_name: impl Into<String>,
    ) -> Self {
        Self {
            n,
            mean,
            sd,
            measure_name: measure_name.into(),
            group_name: group_name.into(),
        }
    }
}

pub fn summarize_group(values: &[f64], group_name: &str, measure_name: &str) -> Result<GroupStats> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFew {
            group: group_name.to_string(),
            n,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(group_name.to_string()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(GroupStats::new(
        n,
        mean,
        (ss / (n - 1) as f64).sqrt(),
        group_name,
        measure_name,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variance {
    /// Student's t with pooled variance.
    #[default]
    Pooled,
    /// Welch's unequal-variance t with Satterthwaite degrees of freedom.
    Welch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestResult {
    /// `±inf` when both groups have zero variance but different means.
    pub t_stat: f64,
    pub df: f64,
    pub p_two_tailed: f64,
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub cohens_d: f64,
    pub ci_level: f64,
    pub variance: Variance,
}

pub const DEFAULT_CI_LEVEL: f64 = 0.95;

pub fn t_test_from_summary(a: &GroupStats, b: &GroupStats) -> Result<TTestResult> {
    t_test_from_summary_with(a, b, DEFAULT_CI_LEVEL, Variance::Pooled)
}

pub fn t_test_from_summary_with(
    a: &GroupStats,
    b: &GroupStats,
    ci_level: f64,
    variance: Variance,
) -> Result<TTestResult> {
    for g in [a, b] {
        if g.n < 2 {
            return Err(StatsError::TooFew {
                group: g.group_name.clone(),
                n: g.n,
            });
        }
    }
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(StatsError::Level(ci_level));
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let (va, vb) = (a.sd * a.sd, b.sd * b.sd);
    let mean_diff = a.mean - b.mean;
    let pooled_var = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    let sp = pooled_var.sqrt();

    let (se, df) = match variance {
        Variance::Pooled => (sp * (1.0 / na + 1.0 / nb).sqrt(), na + nb - 2.0),
        Variance::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (se2.sqrt(), if df.is_finite() { df } else { na + nb - 2.0 })
        }
    };

    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else if num == 0.0 {
            0.0
        } else {
            num.signum() * f64::INFINITY
        }
    };
    let t_stat = ratio(mean_diff, se);
    let cohens_d = ratio(mean_diff, sp);
    let p_two_tailed = student_t_two_tailed_p(t_stat, df);
    let half_width = student_t_quantile(0.5 + 0.5 * ci_level, df) * se;
    Ok(TTestResult {
        t_stat,
        df,
        p_two_tailed,
        mean_diff,
        ci_low: mean_diff - half_width,
        ci_high: mean_diff + half_width,
        cohens_d,
        ci_level,
        variance,
    })
}

pub fn t_test_from_samples(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    t_test_from_samples_with(a, b, DEFAULT_CI_LEVEL, Variance::Pooled)
}

pub fn t_test_from_samples_with(
    a: &[f64],
    b: &[f64],
    ci_level: f64,
    variance: Variance,
) -> Result<TTestResult> {
    let sa = summarize_group(a, "a", "")?;
    let sb = summarize_group(b, "b", "")?;
    t_test_from_summary_with(&sa, &sb, ci_level, variance)
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + (i + 1) as f64));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// Cumulative distribution of Student's t.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * student_t_two_tailed_p(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse CDF by bisection on `student_t_cdf`.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must be in (0, 1)");
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -student_t_quantile(1.0 - p, df);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn subject_means() {
        let rows = [
            SubjectValue::new("S1", Group::Pd, 80.0),
            SubjectValue::new("S2", Group::Control, 120.0),
            SubjectValue::new("S1", Group::Pd, 100.0),
        ];
        let m = per_subject_means(&rows).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(
            (m[0].subject_id.as_str(), m[0].mean, m[0].n),
            ("S1", 90.0, 2)
        );
        assert_eq!((m[1].subject_id.as_str(), m[1].mean), ("S2", 120.0));

        let bad = [
            SubjectValue::new("S1", Group::Pd, 80.0),
            SubjectValue::new("S1", Group::Control, 90.0),
        ];
        assert_eq!(
            per_subject_means(&bad),
            Err(StatsError::InconsistentGroup("S1".into()))
        );
        assert_eq!(per_subject_means(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn summaries() {
        let s = summarize_group(&[1.0, 2.0, 3.0], "g", "m").unwrap();
        assert_eq!((s.n, s.mean, s.sd), (3, 2.0, 1.0));
        assert_eq!(summarize_group(&[4.0; 5], "g", "m").unwrap().sd, 0.0);
        assert!(matches!(
            summarize_group(&[1.0], "g", "m"),
            Err(StatsError::TooFew { n: 1, .. })
        ));
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(close(ln_gamma(1.0), 0.0, 1e-14));
        assert!(close(ln_gamma(2.0), 0.0, 1e-14));
        assert!(close(ln_gamma(5.0), 24f64.ln(), 1e-13));
        assert!(close(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            1e-14
        ));
        assert!(close(ln_gamma(0.1), 2.252_712_651_734_206, 1e-13));
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a, I_x(1, b) = 1 - (1 - x)^b
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.999] {
            assert!(close(regularized_incomplete_beta(x, 1.0, 1.0), x, 1e-14));
            assert!(close(
                regularized_incomplete_beta(x, 3.5, 1.0),
                x.powf(3.5),
                1e-13
            ));
            assert!(close(
                regularized_incomplete_beta(x, 1.0, 2.5),
                1.0 - (1.0 - x).powf(2.5),
                1e-13
            ));
        }
        assert_eq!(regularized_incomplete_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(regularized_incomplete_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn t_cdf_table_values() {
        assert_eq!(student_t_cdf(0.0, 7.0), 0.5);
        assert!(close(student_t_two_tailed_p(2.228, 10.0), 0.05, 5e-4));
        // df = 1 is Cauchy
        for &t in &[-3.0, -0.4, 0.9, 12.0] {
            let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!(close(student_t_cdf(t, 1.0), cauchy, 1e-12));
        }
        // df = 2 closed form
        for &t in &[-2.0f64, 0.3, 5.0] {
            let exact = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            assert!(close(student_t_cdf(t, 2.0), exact, 1e-12));
        }
        assert!(close(
            student_t_quantile(0.975, 10.0),
            2.228_138_851_986_274,
            1e-9
        ));
        assert_eq!(student_t_two_tailed_p(f64::INFINITY, 5.0), 0.0);
    }

    #[test]
    fn identical_groups() {
        let r = t_test_from_samples(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t_stat, r.cohens_d, r.p_two_tailed), (0.0, 0.0, 1.0));
        assert!(r.ci_low < 0.0 && r.ci_high > 0.0);
    }

    #[test]
    fn zero_variance_different_means() {
        let r = t_test_from_samples(&[0.0; 4], &[1.0; 4]).unwrap();
        assert_eq!(r.t_stat, f64::NEG_INFINITY);
        assert_eq!(r.p_two_tailed, 0.0);
        assert_eq!((r.ci_low, r.ci_high), (-1.0, -1.0));
    }

    #[test]
    fn welch_matches_pooled_for_equal_variance_and_n() {
        let a = GroupStats::new(10, 5.0, 2.0, "a", "m");
        let b = GroupStats::new(10, 3.0, 2.0, "b", "m");
        let p = t_test_from_summary(&a, &b).unwrap();
        let w = t_test_from_summary_with(&a, &b, 0.95, Variance::Welch).unwrap();
        assert!(close(p.t_stat, w.t_stat, 1e-12));
        assert!(close(p.df, w.df, 1e-9));
        // unequal variances shrink Welch df
        let c = GroupStats::new(10, 3.0, 6.0, "c", "m");
        let w = t_test_from_summary_with(&a, &c, 0.95, Variance::Welch).unwrap();
        assert!(w.df < 18.0);
    }

    #[test]
    fn invalid_inputs() {
        let a = GroupStats::new(1, 5.0, 2.0, "a", "m");
        let b = GroupStats::new(10, 3.0, 2.0, "b", "m");
        assert!(matches!(
            t_test_from_summary(&a, &b),
            Err(StatsError::TooFew { .. })
        ));
        assert_eq!(
            t_test_from_summary_with(&b, &b, 1.0, Variance::Pooled),
            Err(StatsError::Level(1.0))
        );
    }
}
