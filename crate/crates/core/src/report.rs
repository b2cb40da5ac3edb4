//! Loading finished runs and building the final-policy tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::action::{experiment_grid, ActionSpaceSpec};
use crate::env::Task;
use crate::error::{Error, Result};
use crate::experiment::FINAL_EVAL_FILE;
use crate::metrics::{aggregate, AggregateReport, EpisodeMetrics, Metric};
use crate::ppo::{read_csv, read_json, EvalRecord, TrainingRun, CONFIG_FILE, EVAL_LOG_FILE};

/// Bootstrap seed for every table cell; fixed so reports are reproducible.
pub const REPORT_BOOTSTRAP_SEED: u64 = 0x5eed;

/// One finished agent.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub run: TrainingRun,
    pub episodes: Vec<EpisodeMetrics>,
    pub eval_log: Vec<EvalRecord>,
}

/// Finds every directory below `root` holding a config snapshot and a final
/// evaluation, in sorted path order. Nothing is written.
pub fn load_runs(root: &Path) -> Result<Vec<RunRecord>> {
    let mut dirs = Vec::new();
    collect_dirs(root, 0, &mut dirs)?;
    dirs.sort();
    dirs.into_iter()
        .map(|dir| {
            let run: TrainingRun = read_json(&dir.join(CONFIG_FILE))?;
            let episodes = read_csv(&dir.join(FINAL_EVAL_FILE))?;
            let log_path = dir.join(EVAL_LOG_FILE);
            let eval_log = if log_path.exists() { read_csv(&log_path)? } else { Vec::new() };
            Ok(RunRecord {
                dir,
                run,
                episodes,
                eval_log,
            })
        })
        .collect()
}

fn collect_dirs(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
    if dir.join(CONFIG_FILE).is_file() && dir.join(FINAL_EVAL_FILE).is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    if depth >= 4 {
        return Ok(());
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_dirs(&path, depth + 1, out)?;
        }
    }
    Ok(())
}

/// Runs of one (task, action space) configuration, all seeds.
#[derive(Debug, Clone)]
pub struct ConfigGroup<'a> {
    pub task: Task,
    pub space: ActionSpaceSpec,
    pub runs: Vec<&'a RunRecord>,
}

impl ConfigGroup<'_> {
    /// Episodes of every seed pooled together.
    pub fn pooled(&self) -> Vec<EpisodeMetrics> {
        self.runs.iter().flat_map(|r| r.episodes.iter().cloned()).collect()
    }
}

fn grid_rank(space: &ActionSpaceSpec) -> usize {
    experiment_grid(true)
        .iter()
        .position(|s| s == space)
        .unwrap_or(usize::MAX)
}

/// Groups runs by configuration, ordered by task and then grid position.
pub fn group_runs(runs: &[RunRecord]) -> Vec<ConfigGroup<'_>> {
    let mut groups: Vec<ConfigGroup> = Vec::new();
    for r in runs {
        match groups
            .iter_mut()
            .find(|g| g.task == r.run.task && g.space == r.run.space)
        {
            Some(g) => g.runs.push(r),
            None => groups.push(ConfigGroup {
                task: r.run.task,
                space: r.run.space.clone(),
                runs: vec![r],
            }),
        }
    }
    groups.sort_by(|a, b| {
        (a.task.name(), grid_rank(&a.space), a.space.label())
            .cmp(&(b.task.name(), grid_rank(&b.space), b.space.label()))
    });
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub task: Task,
    pub u_max: f64,
    pub experiment: String,
    pub seeds: usize,
    pub episodes: usize,
    pub cells: Vec<(Metric, AggregateReport)>,
}

pub fn table_rows(groups: &[ConfigGroup]) -> Result<Vec<TableRow>> {
    groups
        .iter()
        .map(|g| {
            let pooled = g.pooled();
            let cells = Metric::table_columns(g.task)
                .iter()
                .map(|m| {
                    let v = m.values(&pooled);
                    if v.is_empty() {
                        return Err(Error::domain(format!("no `{}` values for {}", m.key(), g.space.label())));
                    }
                    Ok((*m, aggregate(&v, REPORT_BOOTSTRAP_SEED)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TableRow {
                task: g.task,
                u_max: g.space.u_max,
                experiment: g.space.label(),
                seeds: g.runs.len(),
                episodes: pooled.len(),
                cells,
            })
        })
        .collect()
}

/// Long-format interval estimates, one line per (configuration, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub task: Task,
    pub u_max: f64,
    pub experiment: String,
    pub metric: Metric,
    pub iqm: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub count: usize,
}

pub fn interval_rows(rows: &[TableRow]) -> Vec<IntervalRow> {
    rows.iter()
        .flat_map(|r| {
            r.cells.iter().map(|(m, a)| IntervalRow {
                task: r.task,
                u_max: r.u_max,
                experiment: r.experiment.clone(),
                metric: *m,
                iqm: a.iqm,
                std: a.std,
                ci_low: a.ci_low,
                ci_high: a.ci_high,
                count: a.count,
            })
        })
        .collect()
}

/// Per-evaluation IQM across seeds with its bootstrap interval, as
/// `(timestep, iqm, low, high)`. Seeds with shorter logs are truncated to
/// the common length.
pub fn sample_complexity(group: &ConfigGroup, metric: Metric) -> Result<Vec<(f64, f64, f64, f64)>> {
    let len = group.runs.iter().map(|r| r.eval_log.len()).min().unwrap_or(0);
    (0..len)
        .filter_map(|i| {
            let v: Vec<f64> = group.runs.iter().filter_map(|r| r.eval_log[i].get(metric)).collect();
            (!v.is_empty()).then(|| {
                let a = aggregate(&v, REPORT_BOOTSTRAP_SEED)?;
                Ok((group.runs[0].eval_log[i].timestep as f64, a.iqm, a.ci_low, a.ci_high))
            })
        })
        .collect()
}

fn umax_tag(u: f64) -> String {
    format!("{u}").replace('.', "p")
}

/// Writes `report_<task>_u<umax>.csv` per table and `intervals.csv`;
/// returns the written paths.
pub fn write_report(rows: &[TableRow], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut tables: BTreeMap<(&str, String), Vec<&TableRow>> = BTreeMap::new();
    for r in rows {
        tables.entry((r.task.name(), umax_tag(r.u_max))).or_default().push(r);
    }
    let mut written = Vec::new();
    for ((task, u), rows) in tables {
        let path = out.join(format!("report_{task}_u{u}.csv"));
        let csv_err = |source| Error::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        let mut header = vec!["Experiment".to_string(), "Seeds".into(), "Episodes (pooled)".into()];
        for (m, _) in &rows[0].cells {
            header.push(format!("{} IQM", m.title()));
            header.push(format!("{} STD", m.title()));
        }
        w.write_record(&header).map_err(csv_err)?;
        for r in rows {
            let mut rec = vec![r.experiment.clone(), r.seeds.to_string(), r.episodes.to_string()];
            for (_, a) in &r.cells {
                rec.push(format!("{:.4}", a.iqm));
                rec.push(format!("{:.4}", a.std));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = out.join("intervals.csv");
    crate::ppo::write_csv(&path, &interval_rows(rows))?;
    written.push(path);
    Ok(written)
}
