//! CSV artifacts. Floating-point fields carry 17 significant digits so two
//! runs can be compared byte for byte.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use mfal_core::metrics::aggregate_stats;
use mfal_core::{CampaignRecord, Error, IterationRecord, MfSurrogate};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn history_header(dim: usize, n_levels: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string(), "level".to_string()];
    h.extend((1..=dim).map(|d| format!("x_{d}")));
    h.extend((1..=n_levels).map(|l| format!("s_{l}")));
    h.push("cc_after".into());
    h.extend((1..=n_levels).map(|l| format!("kstar_{l}")));
    h.push("acquisition".into());
    h
}

pub fn history_row(r: &IterationRecord, n_levels: usize) -> Vec<String> {
    let mut row = vec![r.iteration.to_string(), r.level.to_string()];
    row.extend(r.x.iter().map(|&v| num(v)));
    row.extend(r.observed.iter().map(|&v| opt_num(v)));
    row.push(num(r.cc_after));
    if r.kstars.is_empty() {
        row.extend(std::iter::repeat(String::new()).take(n_levels));
    } else {
        row.extend(r.kstars.iter().map(|k| k.to_string()));
    }
    row.push(opt_num(r.acquisition));
    row
}

/// Append-only history writer used while a campaign runs.
pub struct HistoryWriter {
    inner: csv::Writer<File>,
    n_levels: usize,
}

impl HistoryWriter {
    pub fn create(path: &Path, dim: usize, n_levels: usize) -> anyhow::Result<Self> {
        let mut inner = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        inner.write_record(history_header(dim, n_levels))?;
        inner.flush()?;
        Ok(Self { inner, n_levels })
    }

    pub fn append(&mut self, r: &IterationRecord) -> anyhow::Result<()> {
        self.inner.write_record(history_row(r, self.n_levels))?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Writes the full history of a finished (or interrupted) campaign.
pub fn emit_history(record: &CampaignRecord, path: &Path) -> anyhow::Result<()> {
    let n_levels = record.counts.len();
    let dim = record.final_x_star.len();
    let mut w = HistoryWriter::create(path, dim, n_levels)?;
    for r in record.history() {
        w.append(r)?;
    }
    Ok(())
}

/// Regular grid of the multi-fidelity prediction for `D ≤ 2`.
pub fn surface_grid(model: &MfSurrogate, resolution: usize) -> mfal_core::Result<Vec<(Vec<f64>, f64, f64)>> {
    let dim = model.dim();
    if dim > 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
    }
    let axis: Vec<f64> = (0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect();
    let points: Vec<Vec<f64>> = if dim == 1 {
        axis.iter().map(|&a| vec![a]).collect()
    } else {
        axis.iter().flat_map(|&a| axis.iter().map(move |&b| vec![a, b])).collect()
    };
    Ok(points
        .into_iter()
        .map(|x| {
            let p = model.predict_mf(&x);
            (x, p.mean, p.uncertainty)
        })
        .collect())
}

pub fn emit_surface_grid(model: &MfSurrogate, resolution: usize, path: &Path) -> anyhow::Result<()> {
    let grid = surface_grid(model, resolution)?;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = (1..=model.dim()).map(|d| format!("x_{d}")).collect();
    header.extend(["mean".to_string(), "uncertainty".to_string()]);
    w.write_record(&header)?;
    for (x, mean, u) in grid {
        if !(u >= 0.0) {
            bail!("negative uncertainty {u} at {x:?}");
        }
        let mut row: Vec<String> = x.into_iter().map(num).collect();
        row.push(num(mean));
        row.push(num(u));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One repetition's row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub rep: usize,
    pub seed: u64,
    pub termination: String,
    pub final_cc: f64,
    pub counts: Vec<usize>,
    pub x_star: Vec<f64>,
    pub surrogate_min: f64,
    pub f_true: f64,
    pub e_x: Option<f64>,
    pub e_f: Option<f64>,
    pub e_t: Option<f64>,
    pub e_p: Option<f64>,
}

pub fn metrics_header(dim: usize, n_levels: usize) -> Vec<String> {
    let mut h: Vec<String> = ["rep", "seed", "termination", "final_cc"].map(String::from).to_vec();
    h.extend((1..=n_levels).map(|l| format!("J_{l}")));
    h.extend((1..=dim).map(|d| format!("x_{d}")));
    h.extend(["surrogate_min", "f_true", "e_x", "e_f", "e_t", "e_p"].map(String::from));
    h
}

pub fn write_metrics(rows: &[MetricsRow], dim: usize, n_levels: usize, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(metrics_header(dim, n_levels))?;
    for r in rows {
        let mut row = vec![r.rep.to_string(), r.seed.to_string(), r.termination.clone(), num(r.final_cc)];
        row.extend(r.counts.iter().map(|c| c.to_string()));
        row.extend(r.x_star.iter().map(|&v| num(v)));
        row.push(num(r.surrogate_min));
        row.push(num(r.f_true));
        for v in [r.e_x, r.e_f, r.e_t, r.e_p] {
            row.push(opt_num(v));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> anyhow::Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let n_levels = headers.iter().filter(|h| h.starts_with("J_")).count();
    let dim = headers.iter().filter(|h| h.starts_with("x_")).count();
    let parse_opt = |s: &str| -> anyhow::Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            Ok(Some(s.parse()?))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let mut i = 4;
        let counts = (0..n_levels).map(|k| f(i + k).parse()).collect::<Result<Vec<usize>, _>>()?;
        i += n_levels;
        let x_star = (0..dim).map(|k| f(i + k).parse()).collect::<Result<Vec<f64>, _>>()?;
        i += dim;
        rows.push(MetricsRow {
            rep: f(0).parse()?,
            seed: f(1).parse()?,
            termination: f(2).to_string(),
            final_cc: f(3).parse()?,
            counts,
            x_star,
            surrogate_min: f(i).parse()?,
            f_true: f(i + 1).parse()?,
            e_x: parse_opt(f(i + 2))?,
            e_f: parse_opt(f(i + 3))?,
            e_t: parse_opt(f(i + 4))?,
            e_p: parse_opt(f(i + 5))?,
        });
    }
    Ok(rows)
}

/// Box-plot statistics of every metric column into `aggregate.csv`.
pub fn write_aggregate(rows: &[MetricsRow], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["metric", "n", "q1", "median", "q3", "whisker_lo", "whisker_hi", "outliers"])?;
    for (name, values) in metric_columns(rows) {
        if values.is_empty() {
            continue;
        }
        let s = aggregate_stats(&values)?;
        let mut row = vec![name, s.n.to_string()];
        row.extend([s.q1, s.q2, s.q3, s.whisker_lo, s.whisker_hi].map(num));
        row.push(s.outliers.len().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn metric_columns(rows: &[MetricsRow]) -> Vec<(String, Vec<f64>)> {
    let col = |f: &dyn Fn(&MetricsRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
    let mut out = vec![
        ("e_x".to_string(), col(&|r| r.e_x)),
        ("e_f".to_string(), col(&|r| r.e_f)),
        ("e_t".to_string(), col(&|r| r.e_t)),
        ("e_p".to_string(), col(&|r| r.e_p)),
        ("final_cc".to_string(), col(&|r| Some(r.final_cc))),
    ];
    let n_levels = rows.first().map_or(0, |r| r.counts.len());
    for l in 0..n_levels {
        out.push((format!("J_{}", l + 1), col(&|r| r.counts.get(l).map(|&c| c as f64))));
    }
    out
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> Option<f64> {
    aggregate_stats(values).ok().map(|s| s.q2)
}

/// One summary line: test, D, N, CC, median E_x/E_f/E_t in percent and
/// median J per level (three level columns, blank when absent).
pub fn write_summary(label: &str, dim: usize, budget: f64, rows: &[MetricsRow], path: &Path) -> anyhow::Result<()> {
    let n_levels = rows.first().map_or(0, |r| r.counts.len());
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> =
        ["test", "D", "N", "CC", "median_e_x_pct", "median_e_f_pct", "median_e_t_pct"].map(String::from).to_vec();
    let width = n_levels.max(3);
    header.extend((1..=width).map(|l| format!("median_J_{l}")));
    w.write_record(&header)?;
    let pct = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        median(&v).map(|m| num(100.0 * m)).unwrap_or_default()
    };
    let mut row = vec![label.to_string(), dim.to_string(), n_levels.to_string(), num(budget)];
    row.push(pct(&|r| r.e_x));
    row.push(pct(&|r| r.e_f));
    row.push(pct(&|r| r.e_t));
    for l in 0..width {
        let v: Vec<f64> = rows.iter().filter_map(|r| r.counts.get(l).map(|&c| c as f64)).collect();
        row.push(median(&v).map(num).unwrap_or_default());
    }
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
