//! Repetition campaigns and their artifacts.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use mfal_core::benchmarks::initial_design;
use mfal_core::external::ExternalObjective;
use mfal_core::metrics::{prediction_error, reference_errors};
use mfal_core::objective::Truth;
use mfal_core::{run_campaign, CampaignRecord, FidelityStack};

use crate::config::RunConfig;
use crate::output::{self, HistoryWriter, MetricsRow};

/// Result of one repetition.
pub struct Repetition {
    pub row: MetricsRow,
    pub record: CampaignRecord,
}

pub fn rep_seed(cfg: &RunConfig, rep: usize) -> u64 {
    cfg.base_seed.wrapping_add(rep as u64)
}

/// Runs repetition `rep`, streaming its history to `history` when given.
pub fn run_repetition(cfg: &RunConfig, rep: usize, history: Option<&Path>) -> anyhow::Result<Repetition> {
    let seed = rep_seed(cfg, rep);
    let levels = cfg.fidelity_levels()?;
    let budget = cfg.budget_value();
    let design = initial_design(cfg.dim);
    let mut writer = history.map(|p| HistoryWriter::create(p, cfg.dim, cfg.levels)).transpose()?;
    let mut write_err = None;
    let mut observe = |r: &mfal_core::IterationRecord| {
        if let Some(w) = writer.as_mut() {
            if let Err(e) = w.append(r) {
                write_err.get_or_insert(e);
            }
        }
    };

    let row;
    let record;
    if let Some(ext) = &cfg.external {
        let bounds = match (&ext.lower, &ext.upper) {
            (Some(l), Some(u)) => Some((l.clone(), u.clone())),
            (None, None) => None,
            _ => anyhow::bail!("external bounds need both `lower` and `upper`"),
        };
        let obj = ExternalObjective::spawn(&ext.program, &ext.args, cfg.dim, cfg.levels, bounds)?;
        record = run_campaign(&obj, &design, &levels, budget, &cfg.campaign, &mut observe)?;
        let f_true = obj.truth(&record.final_x_star)?;
        row = base_row(rep, seed, &record, f_true);
    } else {
        let problem = cfg.problem.context("no problem configured")?;
        let stack = FidelityStack::new(problem, cfg.dim, cfg.levels, seed, &cfg.noise)?;
        record = run_campaign(&stack, &design, &levels, budget, &cfg.campaign, &mut observe)?;
        row = benchmark_row(rep, seed, &record, &stack)?;
    }
    if let Some(e) = write_err {
        return Err(e.context("writing history"));
    }
    Ok(Repetition { row, record })
}

fn base_row(rep: usize, seed: u64, record: &CampaignRecord, f_true: f64) -> MetricsRow {
    MetricsRow {
        rep,
        seed,
        termination: record.termination_reason.as_str().to_string(),
        final_cc: record.final_cc,
        counts: record.counts.clone(),
        x_star: record.final_x_star.clone(),
        surrogate_min: record.final_surrogate_min,
        f_true,
        e_x: None,
        e_f: None,
        e_t: None,
        e_p: None,
    }
}

fn benchmark_row(rep: usize, seed: u64, record: &CampaignRecord, stack: &FidelityStack) -> anyhow::Result<MetricsRow> {
    let reference = stack.reference_optimum();
    let f_true = stack.truth(&record.final_x_star)?;
    let mut row = base_row(rep, seed, record, f_true);
    let m = reference_errors(&record.final_x_star, &reference, stack)?;
    row.e_x = Some(m.e_x);
    row.e_f = Some(m.e_f);
    row.e_t = Some(m.e_t);
    row.e_p = Some(prediction_error(record.final_surrogate_min, &record.final_x_star, &reference, stack)?);
    Ok(row)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub jobs: usize,
    pub quiet: bool,
}

/// Runs every repetition and writes all artifacts under `opts.out`:
/// `effective_config.toml`, `history/rep_NNN.csv`, `models/rep_NNN.json`,
/// `metrics.csv`, `aggregate.csv` and `summary.csv`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> anyhow::Result<Vec<MetricsRow>> {
    let out = &opts.out;
    std::fs::create_dir_all(out.join("history"))?;
    std::fs::create_dir_all(out.join("models"))?;
    output::write_text(&out.join("effective_config.toml"), &cfg.to_toml()?)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<anyhow::Result<MetricsRow>>>> =
        Mutex::new((0..cfg.repetitions).map(|_| None).collect());
    let worker = || loop {
        let rep = next.fetch_add(1, Ordering::SeqCst);
        if rep >= cfg.repetitions {
            break;
        }
        let res = run_one(cfg, rep, out, opts.quiet);
        results.lock().expect("results lock")[rep] = Some(res);
    };
    let jobs = opts.jobs.clamp(1, cfg.repetitions);
    std::thread::scope(|s| {
        for _ in 1..jobs {
            s.spawn(worker);
        }
        worker();
    });

    let mut rows = Vec::with_capacity(cfg.repetitions);
    let mut first_err = None;
    for (rep, r) in results.into_inner().expect("results lock").into_iter().enumerate() {
        match r.expect("every repetition ran") {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::error!("repetition {rep} failed: {e:#}");
                first_err.get_or_insert(e.context(format!("repetition {rep}")));
            }
        }
    }
    output::write_metrics(&rows, cfg.dim, cfg.levels, &out.join("metrics.csv"))?;
    if !rows.is_empty() {
        write_reports(cfg, &rows, out)?;
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

fn run_one(cfg: &RunConfig, rep: usize, out: &Path, quiet: bool) -> anyhow::Result<MetricsRow> {
    let hist = out.join("history").join(format!("rep_{rep:03}.csv"));
    let r = run_repetition(cfg, rep, Some(&hist))?;
    let model = serde_json::to_string(&r.record.model)?;
    output::write_text(&out.join("models").join(format!("rep_{rep:03}.json")), &model)?;
    if !quiet {
        eprintln!(
            "rep {rep:3}  seed {:<6} {:<10} cc {:8.3}  J {:?}  E_t {}",
            r.row.seed,
            r.row.termination,
            r.row.final_cc,
            r.row.counts,
            r.row.e_t.map_or("-".into(), |v| format!("{:.4}", v)),
        );
    }
    Ok(r.row)
}

fn write_reports(cfg: &RunConfig, rows: &[MetricsRow], out: &Path) -> anyhow::Result<()> {
    output::write_aggregate(rows, &out.join("aggregate.csv"))?;
    output::write_summary(&cfg.label(), cfg.dim, cfg.budget_value(), rows, &out.join("summary.csv"))
}

/// Rebuilds `aggregate.csv` and `summary.csv` from an existing output
/// directory.
pub fn report(out: &Path) -> anyhow::Result<Vec<MetricsRow>> {
    let cfg = RunConfig::load(&out.join("effective_config.toml"))?;
    let rows = output::read_metrics(&out.join("metrics.csv"))?;
    anyhow::ensure!(!rows.is_empty(), "{} holds no repetitions", out.join("metrics.csv").display());
    write_reports(&cfg, &rows, out)?;
    Ok(rows)
}
