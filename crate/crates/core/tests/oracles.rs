use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use turnangle::detection::{detect_turns, DetectConfig};
use turnangle::geometry::{total_angle, JointPairSet, StepMode};
use turnangle::metrics::{cohens_kappa, AngleBin};
use turnangle::skeleton::Group;
use turnangle::stats::{
    ln_gamma, per_subject_means, regularized_incomplete_beta, student_t_cdf, student_t_quantile,
    student_t_two_tailed_p, summarize_group, t_test_from_samples, t_test_from_summary,
    SubjectValue,
};
use turnangle::synth::{
    generate_cohort, generate_plan, BodyParams, CohortParams, RateProfile, Segment,
};

#[test]
fn incomplete_beta_matches_statrs() {
    for &a in &[0.5, 1.0, 2.5, 5.0, 11.0, 40.0] {
        for &b in &[0.5, 1.0, 3.0, 10.0, 60.0] {
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                let ours = regularized_incomplete_beta(x, a, b);
                let theirs = statrs::function::beta::beta_reg(a, b, x);
                assert!(
                    (ours - theirs).abs() < 1e-10,
                    "I_{x}({a},{b}) {ours} vs {theirs}"
                );
            }
        }
    }
}

#[test]
fn ln_gamma_matches_statrs() {
    for i in 1..400 {
        let x = i as f64 * 0.25;
        let want = statrs::function::gamma::ln_gamma(x);
        assert!(
            (ln_gamma(x) - want).abs() < 1e-10 * want.abs().max(1.0),
            "x = {x}"
        );
    }
}

#[test]
fn t_distribution_matches_statrs() {
    for &df in &[1.0, 2.0, 3.5, 10.0, 20.0, 57.0, 300.0] {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -80..=80 {
            let t = i as f64 * 0.1;
            assert!(
                (student_t_cdf(t, df) - dist.cdf(t)).abs() < 1e-9,
                "cdf t={t} df={df}"
            );
            let p = 2.0 * dist.sf(t.abs());
            assert!((student_t_two_tailed_p(t, df) - p).abs() < 1e-9);
        }
        for &q in &[0.6, 0.9, 0.95, 0.975, 0.995] {
            let ours = student_t_quantile(q, df);
            let theirs = dist.inverse_cdf(q);
            assert!(
                (ours - theirs).abs() < 1e-6 * theirs.abs().max(1.0),
                "q={q} df={df}"
            );
        }
    }
}

#[test]
fn independent_raters_have_kappa_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let draw = |rng: &mut ChaCha8Rng| AngleBin::new(45 * rng.random_range(1..=8u16)).unwrap();
    let a: Vec<AngleBin> = (0..10_000).map(|_| draw(&mut rng)).collect();
    let b: Vec<AngleBin> = (0..10_000).map(|_| draw(&mut rng)).collect();
    let k = cohens_kappa(&a, &b).unwrap();
    assert!(k.abs() < 0.05, "kappa {k}");
}

#[test]
fn null_p_values_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut ps: Vec<f64> = (0..10_000)
        .map(|_| {
            let a: Vec<f64> = (0..8).map(|_| normal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..11).map(|_| normal.sample(&mut rng)).collect();
            t_test_from_samples(&a, &b).unwrap().p_two_tailed
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let ks = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / n).abs().max(((i + 1) as f64 / n - p).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS distance {ks}");
}

fn cohort(
    group: Group,
    prefix: &str,
    angle: (f64, f64),
    rate: (f64, f64),
    n: usize,
) -> CohortParams {
    CohortParams {
        group,
        subject_prefix: prefix.into(),
        n_subjects: n,
        turns_per_subject: 2,
        angle_mean_deg: angle.0,
        angle_sd_deg: angle.1,
        rate_mean_deg_s: rate.0,
        rate_sd_deg_s: rate.1,
        ..CohortParams::default()
    }
}

fn measured_subject_means(p: &CohortParams, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let pairs = JointPairSet::hip_knee();
    let mut angles = Vec::new();
    let mut rates = Vec::new();
    for c in generate_cohort(p, seed).unwrap() {
        let e = total_angle(&c.sequence, &pairs, StepMode::UnsignedArcsin).unwrap();
        angles.push(SubjectValue::new(
            c.subject_id.clone(),
            c.group,
            e.theta_deg,
        ));
        rates.push(SubjectValue::new(c.subject_id, c.group, e.w_max_deg_s));
    }
    let means = |v: &[SubjectValue]| -> Vec<f64> {
        per_subject_means(v)
            .unwrap()
            .into_iter()
            .map(|m| m.mean)
            .collect()
    };
    (means(&angles), means(&rates))
}

#[test]
fn cohort_summary_recovers_generating_parameters() {
    let p = cohort(Group::Pd, "P", (92.65, 13.21), (127.86, 29.77), 400);
    let (angles, _) = measured_subject_means(&p, 5);
    let s = summarize_group(&angles, "PD", "angle").unwrap();
    // standard error of the mean is 13.21 / 20
    assert!(
        (s.mean - 92.65).abs() < 3.0 * 13.21 / 20.0,
        "mean {}",
        s.mean
    );
    assert!((s.sd - 13.21).abs() < 0.15 * 13.21, "sd {}", s.sd);
}

#[test]
fn cohort_closed_loop_reproduces_direction() {
    let pd = cohort(Group::Pd, "P", (92.65, 13.21), (127.86, 29.77), 11);
    let ctl = cohort(Group::Control, "C", (103.75, 16.75), (160.19, 36.49), 11);
    let mut significant = 0;
    let trials = 40;
    for seed in 0..trials {
        let (pa, pr) = measured_subject_means(&pd, 2 * seed);
        let (ca, cr) = measured_subject_means(&ctl, 2 * seed + 1);
        let t_angle = t_test_from_samples(&pa, &ca).unwrap();
        let t_rate = t_test_from_samples(&pr, &cr).unwrap();
        // within four standard errors of the generating mean
        let mean_pd = pa.iter().sum::<f64>() / pa.len() as f64;
        assert!((mean_pd - 92.65).abs() < 4.0 * 13.21 / (11f64).sqrt());
        assert!(t_angle.t_stat.is_finite());
        if t_rate.t_stat < 0.0 && t_rate.p_two_tailed < 0.05 {
            significant += 1;
        }
    }
    // power of an 11 vs 11 design at d = 0.97 is about 0.6
    assert!(
        significant >= trials / 3,
        "significant control > PD in {significant}/{trials}"
    );
}

#[test]
fn identical_cohorts_are_indistinguishable() {
    let p = cohort(Group::Pd, "P", (100.0, 0.0), (150.0, 0.0), 5);
    let (a, r) = measured_subject_means(&p, 1);
    let t = t_test_from_samples(&a, &a).unwrap();
    assert_eq!(t.t_stat, 0.0);
    assert_eq!(t.p_two_tailed, 1.0);
    let t = t_test_from_samples(&r, &r).unwrap();
    assert_eq!(t.p_two_tailed, 1.0);
    let g = summarize_group(&a, "x", "y").unwrap();
    assert_eq!(t_test_from_summary(&g, &g).unwrap().cohens_d, 0.0);
}

#[test]
fn detection_on_random_plans_is_disjoint_sorted_and_repeatable() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let body = BodyParams::default();
    for i in 0..30 {
        let mut segs = vec![Segment::Walk { duration_s: 0.5 }];
        for _ in 0..rng.random_range(1..5) {
            segs.push(Segment::Turn {
                angle_deg: rng.random_range(-200.0..200.0),
                duration_s: rng.random_range(0.3..2.0),
                profile: RateProfile::Smoothstep,
            });
            segs.push(Segment::Walk {
                duration_s: rng.random_range(0.0..1.0),
            });
        }
        let (seq, _) = generate_plan(&format!("r{i}"), &body, &segs).unwrap();
        let cfg = DetectConfig::default();
        let eps = detect_turns(&seq, &cfg).unwrap();
        assert_eq!(eps, detect_turns(&seq, &cfg).unwrap());
        for w in eps.windows(2) {
            assert!(w[0].end_frame <= w[1].start_frame, "{:?}", w);
        }
        for ep in &eps {
            assert!(ep.start_frame < ep.end_frame && ep.end_frame <= seq.len());
            assert!(ep.accumulated_deg.abs() >= cfg.min_turn_deg);
        }
    }
}
