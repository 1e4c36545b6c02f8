use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;

/// Header of the per-clip results table written by `angle`.
pub const RESULT_COLUMNS: [&str; 11] = [
    "clip_id",
    "source",
    "theta_deg",
    "bin",
    "omega_deg_s",
    "w_max_deg_s",
    "skipped_transitions",
    "frames",
    "mode",
    "pairs",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub clip_id: String,
    pub source: String,
    pub theta_deg: Option<f64>,
    pub bin: String,
    pub omega_deg_s: Option<f64>,
    pub w_max_deg_s: Option<f64>,
    pub skipped_transitions: Option<usize>,
    pub frames: Option<usize>,
    pub mode: String,
    pub pairs: String,
    pub error: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty() && self.theta_deg.is_some()
    }
}

fn opt<T: std::str::FromStr>(s: &str) -> Option<T> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

pub fn read_results(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading results {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let clip_col = col("clip_id").context("results table lacks clip_id column")?;
    let theta_col = col("theta_deg").context("results table lacks theta_deg column")?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("").to_string();
        rows.push(ResultRow {
            clip_id: get(Some(clip_col)),
            source: get(col("source")),
            theta_deg: opt(&get(Some(theta_col))),
            bin: get(col("bin")),
            omega_deg_s: opt(&get(col("omega_deg_s"))),
            w_max_deg_s: opt(&get(col("w_max_deg_s"))),
            skipped_transitions: opt(&get(col("skipped_transitions"))),
            frames: opt(&get(col("frames"))),
            mode: get(col("mode")),
            pairs: get(col("pairs")),
            error: get(col("error")),
        });
    }
    Ok(rows)
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes `bytes` to `<out>/<name>` or, without an output directory, to stdout.
pub fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

/// Left-aligned plain-text table.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            s.extend(std::iter::repeat_n(' ', w - c.chars().count()));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}
