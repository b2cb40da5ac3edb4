//! Episode metrics and their robust aggregation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::ActionSpaceSpec;
use crate::dynamics::ThrustCommand;
use crate::env::{StepRecord, Task, TaskEnv};
use crate::error::{Error, Result};
use crate::rollout::Policy;
use crate::seed::{self, Stream};

pub const HISTOGRAM_BINS: usize = 101;

/// Outcome of one evaluation episode. Task-specific fields are `None` for
/// the other task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub case: u64,
    pub total_reward: f64,
    /// 0 or 1
    pub success: u8,
    /// m/s
    pub delta_v: f64,
    pub episode_length: usize,
    pub termination: String,
    pub inspected_points: Option<usize>,
    pub violation_percent: Option<f64>,
    /// m/s
    pub final_speed: Option<f64>,
    /// m
    pub initial_distance: f64,
    /// m
    pub final_distance: f64,
}

/// A metric extracted from episode records, named as in the report tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TotalReward,
    InspectedPoints,
    Success,
    DeltaV,
    ViolationPercent,
    FinalSpeed,
    EpisodeLength,
    FinalDistance,
    InitialDistance,
}

impl Metric {
    /// Columns of the final-policy tables, in table order.
    pub fn table_columns(task: Task) -> &'static [Metric] {
        match task {
            Task::Inspection => &[
                Metric::TotalReward,
                Metric::InspectedPoints,
                Metric::Success,
                Metric::DeltaV,
                Metric::EpisodeLength,
            ],
            Task::Docking => &[
                Metric::TotalReward,
                Metric::Success,
                Metric::DeltaV,
                Metric::ViolationPercent,
                Metric::FinalSpeed,
                Metric::EpisodeLength,
            ],
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Metric::TotalReward => "total_reward",
            Metric::InspectedPoints => "inspected_points",
            Metric::Success => "success",
            Metric::DeltaV => "delta_v",
            Metric::ViolationPercent => "violation_percent",
            Metric::FinalSpeed => "final_speed",
            Metric::EpisodeLength => "episode_length",
            Metric::FinalDistance => "final_distance",
            Metric::InitialDistance => "initial_distance",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Metric::TotalReward => "Total Reward",
            Metric::InspectedPoints => "Inspected Points",
            Metric::Success => "Success Rate",
            Metric::DeltaV => "Delta-v (m/s)",
            Metric::ViolationPercent => "Violation (%)",
            Metric::FinalSpeed => "Final Speed (m/s)",
            Metric::EpisodeLength => "Episode Length (steps)",
            Metric::FinalDistance => "Final Distance (m)",
            Metric::InitialDistance => "Initial Distance (m)",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        [
            Metric::TotalReward,
            Metric::InspectedPoints,
            Metric::Success,
            Metric::DeltaV,
            Metric::ViolationPercent,
            Metric::FinalSpeed,
            Metric::EpisodeLength,
            Metric::FinalDistance,
            Metric::InitialDistance,
        ]
        .into_iter()
        .find(|m| m.key() == key)
        .ok_or_else(|| Error::config(format!("unknown metric `{key}`")))
    }

    pub fn extract(&self, m: &EpisodeMetrics) -> Option<f64> {
        match self {
            Metric::TotalReward => Some(m.total_reward),
            Metric::InspectedPoints => m.inspected_points.map(|v| v as f64),
            Metric::Success => Some(m.success as f64),
            Metric::DeltaV => Some(m.delta_v),
            Metric::ViolationPercent => m.violation_percent,
            Metric::FinalSpeed => m.final_speed,
            Metric::EpisodeLength => Some(m.episode_length as f64),
            Metric::FinalDistance => Some(m.final_distance),
            Metric::InitialDistance => Some(m.initial_distance),
        }
    }

    pub fn values(&self, records: &[EpisodeMetrics]) -> Vec<f64> {
        records.iter().filter_map(|r| self.extract(r)).collect()
    }
}

/// Interquartile mean: sort, drop `floor(n/4)` values from each end, and
/// average the rest.
pub fn iqm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("IQM of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(iqm_sorted(&sorted))
}

fn iqm_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let cut = n / 4;
    let kept = &sorted[cut..n - cut];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Population standard deviation over the untrimmed sample.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile-bootstrap confidence interval of the IQM.
///
/// The interval is widened if needed so that it always contains the point
/// estimate.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::domain("bootstrap of an empty sample"));
    }
    if !(0.0..1.0).contains(&level) || resamples == 0 {
        return Err(Error::domain("confidence level must be in [0, 1) with >= 1 resample"));
    }
    let point = iqm(values)?;
    let mut rng = seed::stream_rng(seed, Stream::Bootstrap);
    let n = values.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.random_range(0..n)];
            }
            buf.sort_by(f64::total_cmp);
            iqm_sorted(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = quantile_sorted(&stats, alpha).min(point);
    let hi = quantile_sorted(&stats, 1.0 - alpha).max(point);
    Ok((lo, hi))
}

/// IQM, spread and confidence interval of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub iqm: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub count: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;
pub const CI_LEVEL: f64 = 0.95;

pub fn aggregate(values: &[f64], seed: u64) -> Result<AggregateReport> {
    let (ci_low, ci_high) = bootstrap_ci(values, CI_LEVEL, BOOTSTRAP_RESAMPLES, seed)?;
    Ok(AggregateReport {
        iqm: iqm(values)?,
        std: std_dev(values),
        ci_low,
        ci_high,
        count: values.len(),
    })
}

/// Per-axis action usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHistogram {
    /// Table values (discrete) or bin centres (continuous).
    pub bins: Vec<f64>,
    /// `counts[axis][bin]`
    pub counts: [Vec<u64>; 3],
}

impl ActionHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of all axis-actions falling in each bin (axes pooled).
    pub fn pooled_fractions(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        (0..self.bins.len())
            .map(|b| self.counts.iter().map(|c| c[b]).sum::<u64>() as f64 / total)
            .collect()
    }

    /// Columns `value,x,y,z`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let rows: Vec<HistogramRow> = self
            .bins
            .iter()
            .enumerate()
            .map(|(b, &value)| HistogramRow {
                value,
                x: self.counts[0][b],
                y: self.counts[1][b],
                z: self.counts[2][b],
            })
            .collect();
        crate::ppo::write_csv(path, &rows)
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let rows: Vec<HistogramRow> = crate::ppo::read_csv(path)?;
        let mut h = ActionHistogram {
            bins: Vec::with_capacity(rows.len()),
            counts: [Vec::new(), Vec::new(), Vec::new()],
        };
        for r in rows {
            h.bins.push(r.value);
            h.counts[0].push(r.x);
            h.counts[1].push(r.y);
            h.counts[2].push(r.z);
        }
        Ok(h)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HistogramRow {
    value: f64,
    x: u64,
    y: u64,
    z: u64,
}

/// Counts how often each action value was used along each axis. Continuous
/// thrust is binned into 101 uniform bins over `[-u_max, u_max]`.
pub fn action_histogram(thrusts: &[ThrustCommand], space: &ActionSpaceSpec) -> Result<ActionHistogram> {
    if thrusts.is_empty() {
        return Err(Error::domain("action histogram of an empty log"));
    }
    let (bins, index): (Vec<f64>, Box<dyn Fn(f64) -> usize>) = match space.choice_set() {
        Ok(table) => {
            let t = table.clone();
            (
                table,
                Box::new(move |v: f64| {
                    let mut best = 0;
                    for (j, x) in t.iter().enumerate() {
                        if (x - v).abs() < (t[best] - v).abs() {
                            best = j;
                        }
                    }
                    best
                }),
            )
        }
        Err(_) => {
            let u = space.u_max;
            let width = 2.0 * u / HISTOGRAM_BINS as f64;
            let centres = (0..HISTOGRAM_BINS)
                .map(|b| -u + width * (b as f64 + 0.5))
                .collect();
            (
                centres,
                Box::new(move |v: f64| {
                    let b = ((v.clamp(-u, u) + u) / width).floor() as usize;
                    b.min(HISTOGRAM_BINS - 1)
                }),
            )
        }
    };
    let mut counts = [vec![0u64; bins.len()], vec![0u64; bins.len()], vec![0u64; bins.len()]];
    for t in thrusts {
        for (axis, v) in t.components().into_iter().enumerate() {
            counts[axis][index(v)] += 1;
        }
    }
    Ok(ActionHistogram { bins, counts })
}

/// Runs one episode to termination, optionally recording every step.
pub fn run_episode(
    env: &mut TaskEnv,
    policy: &dyn Policy,
    case_seed: u64,
    deterministic: bool,
    record: bool,
) -> Result<(EpisodeMetrics, Vec<StepRecord>)> {
    let mut rng = seed::stream_rng(case_seed, Stream::Evaluation);
    let mut obs = env.reset(case_seed);
    let mut steps = Vec::new();
    loop {
        let act = policy.act(&obs, &mut rng, deterministic)?;
        let thrust = env.space().decode(&act.choice)?;
        let step = steps.len();
        let (t, rec) = env
            .step_thrust(&thrust)
            .map_err(|e| Error::EnvStep {
                step,
                source: Box::new(e),
            })?;
        if record {
            steps.push(rec);
        } else {
            steps.clear();
        }
        if t.done {
            let mut m = env.summary().expect("episode finished");
            m.case = case_seed;
            return Ok((m, steps));
        }
        obs = t.observation;
    }
}

/// Evaluates `policy` on cases `seed_base .. seed_base + num_cases`.
///
/// Inspection episodes are scored with the constant evaluation fuel weight.
/// Cases run in parallel; results come back in case order.
pub fn evaluate_policy(
    task: Task,
    space: &ActionSpaceSpec,
    policy: &dyn Policy,
    num_cases: usize,
    seed_base: u64,
    deterministic: bool,
) -> Result<Vec<EpisodeMetrics>> {
    let env = TaskEnv::new(task, space.clone(), true)?;
    (0..num_cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = env.clone();
            run_episode(&mut env, policy, seed_base + i, deterministic, false).map(|(m, _)| m)
        })
        .collect()
}

/// Like [`evaluate_policy`] but also returns the thrust history of every
/// case and the full step log of the first `trajectories` cases.
pub fn evaluate_with_logs(
    task: Task,
    space: &ActionSpaceSpec,
    policy: &dyn Policy,
    num_cases: usize,
    seed_base: u64,
    deterministic: bool,
    trajectories: usize,
) -> Result<(Vec<EpisodeMetrics>, Vec<ThrustCommand>, Vec<Vec<StepRecord>>)> {
    let env = TaskEnv::new(task, space.clone(), true)?;
    let runs: Vec<(EpisodeMetrics, Vec<StepRecord>)> = (0..num_cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = env.clone();
            run_episode(&mut env, policy, seed_base + i, deterministic, true)
        })
        .collect::<Result<_>>()?;
    let mut metrics = Vec::with_capacity(runs.len());
    let mut thrusts = Vec::new();
    let mut logs = Vec::new();
    for (i, (m, steps)) in runs.into_iter().enumerate() {
        metrics.push(m);
        thrusts.extend(steps.iter().map(|s| s.thrust));
        if i < trajectories {
            logs.push(steps);
        }
    }
    Ok((metrics, thrusts, logs))
}
