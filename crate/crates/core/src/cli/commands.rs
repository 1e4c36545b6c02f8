use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Deserialize;

use super::tables::{csv_bytes, emit, read_results, text_table, ResultRow, RESULT_COLUMNS};
use super::{usage, ExitStatus, RunConfig};
use crate::detection::{detect_turns, trim_episode, TurnEpisode};
use crate::fmt::sig6;
use crate::geometry::total_angle;
use crate::metrics::{
    bin_distribution, error_histogram, grouped_eval, quantize_angle, EvalRecord, EvalReport,
    EvalRow, GroupKey,
};
use crate::skeleton::{
    load_annotations, load_sequence, save_sequence, Annotation, Group, Scenario, SkeletonSequence,
};
use crate::stats::{
    per_subject_means, summarize_group, t_test_from_summary_with, SubjectValue, Variance,
};
use crate::synth::{derive_seed, generate_cohort, generate_suite, CohortParams, SuiteParams};

const SKELETON_EXT: &str = "skel";
const HISTOGRAM_WIDTH_DEG: f64 = 5.0;

/// Files as given; directories expand to their `.skel` files in name order.
fn expand_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return usage("no input files");
    }
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == SKELETON_EXT))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return usage("no skeleton files found in inputs");
    }
    Ok(out)
}

fn load_with_override(path: &Path, cfg: &RunConfig) -> anyhow::Result<SkeletonSequence> {
    let mut seq = load_sequence(path).with_context(|| path.display().to_string())?;
    if let Some(up) = cfg.up_override {
        seq.up_axis = up;
    }
    Ok(seq)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn bin_label(theta: f64) -> String {
    match quantize_angle(theta) {
        Ok(q) => q.bin.map_or_else(|| "sub".to_string(), |b| b.to_string()),
        Err(_) => String::new(),
    }
}

fn analyze_clip(path: &Path, cfg: &RunConfig) -> ResultRow {
    let mut row = ResultRow {
        clip_id: stem(path),
        source: path.display().to_string(),
        theta_deg: None,
        bin: String::new(),
        omega_deg_s: None,
        w_max_deg_s: None,
        skipped_transitions: None,
        frames: None,
        mode: cfg.mode.to_string(),
        pairs: cfg.pairs.to_string(),
        error: String::new(),
    };
    let seq = match load_with_override(path, cfg) {
        Ok(s) => s,
        Err(e) => {
            row.error = format!("{e:#}");
            return row;
        }
    };
    row.clip_id = seq.clip_id.clone();
    row.frames = Some(seq.len());
    match total_angle(&seq, &cfg.pairs, cfg.mode) {
        Ok(est) => {
            row.theta_deg = Some(est.theta_deg);
            row.bin = bin_label(est.theta_deg);
            row.omega_deg_s = Some(est.omega_deg_s);
            row.w_max_deg_s = Some(est.w_max_deg_s);
            row.skipped_transitions = Some(est.skipped_transitions);
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

fn result_cells(r: &ResultRow) -> Vec<String> {
    let f = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    let u = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    vec![
        r.clip_id.clone(),
        r.source.clone(),
        f(r.theta_deg),
        r.bin.clone(),
        f(r.omega_deg_s),
        f(r.w_max_deg_s),
        u(r.skipped_transitions),
        u(r.frames),
        r.mode.clone(),
        r.pairs.clone(),
        r.error.clone(),
    ]
}

pub fn cmd_angle(inputs: &[PathBuf], cfg: &RunConfig) -> anyhow::Result<ExitStatus> {
    let files = expand_inputs(inputs)?;
    let rows: Vec<ResultRow> = cfg
        .pool()?
        .install(|| files.par_iter().map(|f| analyze_clip(f, cfg)).collect());
    let ok = rows.iter().filter(|r| r.is_ok()).count();
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("warning: {}: {}", r.source, r.error);
    }
    let cells: Vec<Vec<String>> = rows.iter().map(result_cells).collect();
    emit(
        cfg.out.as_deref(),
        "angles.csv",
        &csv_bytes(&RESULT_COLUMNS, &cells)?,
    )?;
    Ok(ExitStatus::from_counts(ok, rows.len() - ok))
}

pub const EPISODE_COLUMNS: [&str; 6] = [
    "clip_id",
    "start_frame",
    "end_frame",
    "accumulated_deg",
    "direction",
    "mean_rate_deg_s",
];

struct DetectOutcome {
    seq: Option<SkeletonSequence>,
    episodes: Vec<TurnEpisode>,
    error: Option<String>,
}

pub fn cmd_detect(
    inputs: &[PathBuf],
    cfg: &RunConfig,
    emit_clips: bool,
) -> anyhow::Result<ExitStatus> {
    if emit_clips && cfg.out.is_none() {
        return usage("--emit-clips requires --out");
    }
    let files = expand_inputs(inputs)?;
    let pool = cfg.pool()?;
    let outcomes: Vec<DetectOutcome> = pool.install(|| {
        files
            .par_iter()
            .map(|f| match load_with_override(f, cfg) {
                Ok(seq) => match detect_turns(&seq, &cfg.detect) {
                    Ok(episodes) => DetectOutcome {
                        seq: Some(seq),
                        episodes,
                        error: None,
                    },
                    Err(e) => DetectOutcome {
                        seq: None,
                        episodes: vec![],
                        error: Some(format!("{}: {e}", f.display())),
                    },
                },
                Err(e) => DetectOutcome {
                    seq: None,
                    episodes: vec![],
                    error: Some(format!("{e:#}")),
                },
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failed = 0;
    for o in &outcomes {
        if let Some(e) = &o.error {
            eprintln!("warning: {e}");
            failed += 1;
        }
        if let Some(seq) = &o.seq {
            for ep in &o.episodes {
                rows.push(vec![
                    seq.clip_id.clone(),
                    ep.start_frame.to_string(),
                    ep.end_frame.to_string(),
                    sig6(ep.accumulated_deg),
                    ep.direction.to_string(),
                    sig6(ep.mean_rate_deg_s),
                ]);
            }
        }
    }
    emit(
        cfg.out.as_deref(),
        "episodes.csv",
        &csv_bytes(&EPISODE_COLUMNS, &rows)?,
    )?;

    if emit_clips {
        let dir = cfg.out.as_ref().expect("checked above").join("clips");
        fs::create_dir_all(&dir)?;
        let clips: Vec<SkeletonSequence> = outcomes
            .iter()
            .filter_map(|o| o.seq.as_ref().map(|s| (s, &o.episodes)))
            .flat_map(|(s, eps)| eps.iter().map(move |ep| trim_episode(s, ep)))
            .collect::<Result<_, _>>()?;
        pool.install(|| {
            clips.par_iter().try_for_each(|c| {
                save_sequence(c, dir.join(format!("{}.{SKELETON_EXT}", c.clip_id)))
            })
        })?;
    }
    Ok(ExitStatus::from_counts(outcomes.len() - failed, failed))
}

struct Joined {
    records: Vec<(EvalRecord, ResultRow)>,
    unmatched: Vec<String>,
    failed: Vec<String>,
    unannotated_only: Vec<String>,
}

fn join(results: &Path, annotations: &Path) -> anyhow::Result<Joined> {
    let rows = read_results(results)?;
    let set = load_annotations(annotations)
        .with_context(|| format!("reading annotations {}", annotations.display()))?;
    if set.unknown_values > 0 {
        eprintln!(
            "warning: {} scenario/group values not in vocabulary, mapped to unknown",
            set.unknown_values
        );
    }
    let mut by_clip: BTreeMap<&str, &Annotation> = BTreeMap::new();
    for a in &set.annotations {
        if by_clip.insert(&a.clip_id, a).is_some() {
            return usage(format!("duplicate clip_id `{}` in annotations", a.clip_id));
        }
    }
    let mut joined = Joined {
        records: Vec::new(),
        unmatched: Vec::new(),
        failed: Vec::new(),
        unannotated_only: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    for r in rows {
        seen.insert(r.clip_id.clone());
        if !r.is_ok() {
            joined.failed.push(r.clip_id.clone());
            continue;
        }
        match by_clip.get(r.clip_id.as_str()) {
            Some(a) => {
                let rec = EvalRecord::new(r.theta_deg.expect("ok row"), a)?;
                joined.records.push((rec, r));
            }
            None => joined.unmatched.push(r.clip_id.clone()),
        }
    }
    joined.unannotated_only = by_clip
        .keys()
        .filter(|k| !seen.contains(**k))
        .map(|k| k.to_string())
        .collect();
    if joined.records.is_empty() {
        return Err(anyhow!("no result rows could be joined with annotations"));
    }
    Ok(joined)
}

fn eval_cells(r: &EvalRow) -> Vec<String> {
    vec![
        r.group.clone(),
        r.n_turns.to_string(),
        sig6(r.accuracy),
        sig6(r.mae_deg),
        sig6(r.wprec),
    ]
}

fn eval_text(rep: &EvalReport, joined: &Joined, mode: &str, pairs: &str) -> String {
    let pct = |v: f64| sig6(100.0 * v);
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .chain([&rep.average, &rep.overall])
        .map(|r| {
            vec![
                r.group.clone(),
                r.n_turns.to_string(),
                pct(r.accuracy),
                sig6(r.mae_deg),
                pct(r.wprec),
            ]
        })
        .collect();
    let mut s = format!(
        "Grouped by {} (mode {mode}, pairs {pairs})\n\n",
        rep.key.as_str()
    );
    s += &text_table(&["group", "n", "accuracy_%", "mae_deg", "wprec_%"], &rows);
    s += &format!("\nsub-threshold predictions: {}\n", rep.sub_threshold);
    s += &format!("clamped predictions: {}\n", rep.clamped);
    let list = |v: &[String]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.join(", ")
        }
    };
    s += &format!(
        "unmatched clip_ids (excluded): {}\n",
        list(&joined.unmatched)
    );
    s += &format!("failed clips (excluded): {}\n", list(&joined.failed));
    s += &format!(
        "annotated clips without results: {}\n",
        list(&joined.unannotated_only)
    );
    s
}

pub fn cmd_eval(
    results: &Path,
    annotations: &Path,
    group_by: &str,
    cfg: &RunConfig,
) -> anyhow::Result<ExitStatus> {
    let keys = group_by
        .split(',')
        .filter(|k| !k.trim().is_empty())
        .map(str::parse::<GroupKey>)
        .collect::<Result<Vec<_>, _>>();
    let keys = match keys {
        Ok(k) if !k.is_empty() => k,
        Ok(_) => return usage("--group-by is empty"),
        Err(e) => return usage(format!("--group-by: {e}")),
    };
    let joined = join(results, annotations)?;
    let records: Vec<EvalRecord> = joined.records.iter().map(|(r, _)| r.clone()).collect();
    let (mode, pairs) = joined
        .records
        .first()
        .map(|(_, r)| (r.mode.clone(), r.pairs.clone()))
        .unwrap_or_default();

    let out = cfg.out.as_deref();
    for key in keys {
        let rep = grouped_eval(&records, key)?;
        let text = eval_text(&rep, &joined, &mode, &pairs);
        match out {
            Some(_) => {
                let rows: Vec<Vec<String>> = rep
                    .rows
                    .iter()
                    .chain([&rep.average, &rep.overall])
                    .map(eval_cells)
                    .collect();
                let header = ["group_key", "n", "accuracy", "mae_deg", "wprec"];
                emit(
                    out,
                    &format!("eval_{}.csv", key.as_str()),
                    &csv_bytes(&header, &rows)?,
                )?;
                emit(out, &format!("eval_{}.txt", key.as_str()), text.as_bytes())?;
            }
            None => emit(None, "", format!("{text}\n").as_bytes())?,
        }
    }

    if out.is_some() {
        let mut header = vec![
            "label_bin",
            "n",
            "mean_pred_deg",
            "sd_pred_deg",
            "sub_threshold",
        ];
        let pred_cols: Vec<String> = (1..=8).map(|k| format!("pred_{}", 45 * k)).collect();
        header.extend(pred_cols.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = bin_distribution(&records)
            .into_iter()
            .map(|d| {
                let mut r = vec![
                    d.label_bin.to_string(),
                    d.n.to_string(),
                    sig6(d.mean_pred_deg),
                    sig6(d.sd_pred_deg),
                    d.sub_threshold.to_string(),
                ];
                r.extend(d.predicted_counts.iter().map(|c| c.to_string()));
                r
            })
            .collect();
        emit(out, "bin_distribution.csv", &csv_bytes(&header, &rows)?)?;

        let rows: Vec<Vec<String>> = error_histogram(&records, HISTOGRAM_WIDTH_DEG)
            .into_iter()
            .map(|(lo, c)| vec![sig6(lo), sig6(lo + HISTOGRAM_WIDTH_DEG), c.to_string()])
            .collect();
        emit(
            out,
            "error_histogram.csv",
            &csv_bytes(&["error_lo_deg", "error_hi_deg", "count"], &rows)?,
        )?;
    }
    Ok(if joined.failed.is_empty() {
        ExitStatus::Success
    } else {
        ExitStatus::Partial
    })
}

pub const STATS_COLUMNS: [&str; 11] = [
    "measure", "group", "n", "mean", "sd", "t", "df", "p", "d", "ci_low", "ci_high",
];

pub fn cmd_stats(
    results: &Path,
    annotations: &Path,
    measure: &str,
    ci_level: f64,
    welch: bool,
    cfg: &RunConfig,
) -> anyhow::Result<ExitStatus> {
    let measures: &[&str] = match measure {
        "angle" => &["angle"],
        "w_max" => &["w_max"],
        "both" => &["angle", "w_max"],
        other => return usage(format!("--measure: unknown `{other}` (angle, w_max, both)")),
    };
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return usage("--ci-level must be in (0, 1)");
    }
    let variance = if welch {
        Variance::Welch
    } else {
        Variance::Pooled
    };
    let joined = join(results, annotations)?;

    let mut rows = Vec::new();
    for &m in measures {
        let values: Vec<SubjectValue> = joined
            .records
            .iter()
            .filter(|(rec, _)| rec.group != Group::Unknown)
            .filter_map(|(rec, row)| {
                let v = match m {
                    "angle" => row.theta_deg,
                    _ => row.w_max_deg_s,
                };
                v.map(|v| SubjectValue::new(rec.subject_id.clone(), rec.group, v))
            })
            .collect();
        if values.is_empty() {
            return Err(anyhow!("no PD or control records for measure {m}"));
        }
        let means = per_subject_means(&values)?;
        let pick = |g: Group| -> Vec<f64> {
            means
                .iter()
                .filter(|s| s.group == g)
                .map(|s| s.mean)
                .collect()
        };
        let pd = summarize_group(&pick(Group::Pd), Group::Pd.as_str(), m)
            .map_err(|e| anyhow!("insufficient subjects: {e}"))?;
        let control = summarize_group(&pick(Group::Control), Group::Control.as_str(), m)
            .map_err(|e| anyhow!("insufficient subjects: {e}"))?;
        let t = t_test_from_summary_with(&pd, &control, ci_level, variance)?;
        for g in [&pd, &control] {
            rows.push(vec![
                m.to_string(),
                g.group_name.clone(),
                g.n.to_string(),
                sig6(g.mean),
                sig6(g.sd),
                sig6(t.t_stat),
                sig6(t.df),
                sig6(t.p_two_tailed),
                sig6(t.cohens_d),
                sig6(t.ci_low),
                sig6(t.ci_high),
            ]);
        }
    }

    let out = cfg.out.as_deref();
    if out.is_some() {
        emit(out, "stats.csv", &csv_bytes(&STATS_COLUMNS, &rows)?)?;
    }
    let mut text = format!(
        "PD vs control, per-subject means, {} t-test, {}% CI\n\n",
        if welch { "Welch" } else { "pooled-variance" },
        sig6(100.0 * ci_level)
    );
    text += &text_table(&STATS_COLUMNS, &rows);
    emit(out, "stats.txt", text.as_bytes())?;
    Ok(ExitStatus::Success)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthFile {
    suite: Option<SuiteParams>,
    #[serde(default)]
    cohort: Vec<CohortParams>,
}

struct SynthClip {
    seq: SkeletonSequence,
    truth: crate::synth::GroundTruth,
    subject_id: String,
    group: Group,
}

pub fn cmd_synth(params: &Path, cfg: &RunConfig) -> anyhow::Result<ExitStatus> {
    let Some(out) = cfg.out.as_deref() else {
        return usage("synth requires --out");
    };
    let text = match fs::read_to_string(params) {
        Ok(t) => t,
        Err(e) => return usage(format!("{}: {e}", params.display())),
    };
    let file: SynthFile = match toml::from_str(&text) {
        Ok(f) => f,
        Err(e) => return usage(format!("{}: {e}", params.display())),
    };
    if file.suite.is_none() && file.cohort.is_empty() {
        return usage("params file defines neither [suite] nor [[cohort]]");
    }

    let mut clips = Vec::new();
    if let Some(suite) = &file.suite {
        let generated = match generate_suite(suite, cfg.seed) {
            Ok(g) => g,
            Err(e) => return usage(format!("[suite] {e}")),
        };
        clips.extend(generated.into_iter().map(|(seq, truth)| SynthClip {
            seq,
            truth,
            subject_id: "synth".into(),
            group: Group::Unknown,
        }));
    }
    for (k, c) in file.cohort.iter().enumerate() {
        let generated = match generate_cohort(c, derive_seed(cfg.seed.wrapping_add(1), k as u64)) {
            Ok(g) => g,
            Err(e) => return usage(format!("[[cohort]] #{}: {e}", k + 1)),
        };
        clips.extend(generated.into_iter().map(|c| SynthClip {
            seq: c.sequence,
            truth: c.truth,
            subject_id: c.subject_id,
            group: c.group,
        }));
    }
    let mut ids = BTreeSet::new();
    for c in &clips {
        if !ids.insert(c.seq.clip_id.as_str()) {
            return usage(format!("duplicate clip id `{}`", c.seq.clip_id));
        }
    }

    let dir = out.join("clips");
    fs::create_dir_all(&dir)?;
    cfg.pool()?.install(|| {
        clips.par_iter().try_for_each(|c| {
            save_sequence(
                &c.seq,
                dir.join(format!("{}.{SKELETON_EXT}", c.seq.clip_id)),
            )
        })
    })?;

    let mut truth_rows = Vec::new();
    let mut annotations = Vec::new();
    for c in &clips {
        for t in &c.truth.turns {
            truth_rows.push(vec![
                c.seq.clip_id.clone(),
                sig6(t.turn_deg),
                t.start_frame.to_string(),
                t.end_frame.to_string(),
                sig6(t.mean_rate_deg_s),
                sig6(t.max_rate_deg_s),
            ]);
        }
        let total = c.truth.total_turn_deg();
        let duration_s: f64 = c
            .truth
            .turns
            .iter()
            .map(|t| t.transitions() as f64)
            .sum::<f64>()
            / c.seq.fps();
        if let (Ok(q), true) = (quantize_angle(total), duration_s > 0.0) {
            if let Some(label_bin) = q.bin {
                annotations.push(vec![
                    c.seq.clip_id.clone(),
                    label_bin.to_string(),
                    sig6(duration_s),
                    Scenario::Unknown.as_str().to_string(),
                    "synthetic".to_string(),
                    c.subject_id.clone(),
                    c.group.as_str().to_string(),
                ]);
            }
        }
    }
    let header = [
        "clip_id",
        "turn_deg",
        "start_frame",
        "end_frame",
        "mean_rate",
        "max_rate",
    ];
    emit(
        Some(out),
        "groundtruth.csv",
        &csv_bytes(&header, &truth_rows)?,
    )?;
    emit(
        Some(out),
        "annotations.csv",
        &csv_bytes(&crate::skeleton::ANNOTATION_COLUMNS, &annotations)?,
    )?;
    eprintln!("wrote {} clips to {}", clips.len(), dir.display());
    Ok(ExitStatus::Success)
}
