use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use proxops::action::ActionSpaceSpec;
use proxops::checkpoint;
use proxops::docking::DockingConfig;
use proxops::env::Task;
use proxops::experiment::{self, ExperimentConfig, HISTOGRAM_FILE, TRAJECTORY_FILE};
use proxops::metrics::{iqm, ActionHistogram, Metric};
use proxops::plot::{self, Estimate};
use proxops::ppo::{read_json, Scale, TrainingRun, CONFIG_FILE, FINAL_POLICY_FILE};
use proxops::report::{self, RunRecord};
use proxops::{trajectory, Error, Result};

/// Environment variable holding the worker thread count.
const WORKERS_VAR: &str = "PROXOPS_WORKERS";

#[derive(Parser)]
#[command(name = "proxops", version, about = "Train and evaluate proximity-operations agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one experiment config per grid entry.
    GenConfigs {
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        /// Restrict to one task.
        #[arg(long)]
        task: Option<Task>,
        /// Run root recorded in the configs; configs go to <out>/configs.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Train agents (every seed of the config unless --seed is given).
    Train {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        seed: Vec<u64>,
        /// Override the total timestep budget.
        #[arg(long)]
        timesteps: Option<usize>,
        #[arg(long)]
        eval_interval: Option<usize>,
        /// Final evaluation cases per agent.
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Evaluate a trained policy on the fixed final test cases.
    Evaluate {
        /// Run directory, or a policy file (then --task and the space flags
        /// are required).
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        task: Option<Task>,
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
    /// Build the final-policy tables from finished runs.
    Report {
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Render SVG figures from finished runs (read-only over run data).
    Plot {
        #[arg(long, value_enum, default_value = "all")]
        kind: PlotKind,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Paper,
    Desk,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Paper => Scale::Paper,
            ScaleArg::Desk => Scale::Desk,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Interval,
    Histogram,
    Trajectory,
    Speedlimit,
    Curves,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceKind {
    Continuous,
    Discrete,
    Explicit,
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long, value_enum)]
    space: Option<SpaceKind>,
    /// Maximum thrust per axis (N).
    #[arg(long, default_value_t = 1.0)]
    umax: f64,
    /// Choices per axis for a discrete space (odd, >= 3).
    #[arg(long)]
    choices: Option<usize>,
    /// Comma-separated positive magnitudes of an explicit space, e.g. 1.0,0.1.
    #[arg(long, value_delimiter = ',')]
    explicit_values: Vec<f64>,
}

impl SpaceArgs {
    fn build(&self) -> Result<ActionSpaceSpec> {
        match self.space {
            None => Err(Error::Config("--space is required".into())),
            Some(SpaceKind::Continuous) => ActionSpaceSpec::continuous(self.umax),
            Some(SpaceKind::Discrete) => {
                let k = self
                    .choices
                    .ok_or_else(|| Error::Config("--choices is required for a discrete space".into()))?;
                ActionSpaceSpec::uniform(k, self.umax)
            }
            Some(SpaceKind::Explicit) => {
                if self.explicit_values.is_empty() {
                    return Err(Error::Config("--explicit-values is required".into()));
                }
                let mut values: Vec<f64> = self.explicit_values.iter().map(|v| v.abs()).collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                let mut table: Vec<f64> = values.iter().rev().map(|v| -v).collect();
                table.push(0.0);
                table.extend(values);
                ActionSpaceSpec::explicit(table)
            }
        }
    }
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment config file; replaces the task and space flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

impl SpecArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return ExperimentConfig::load(path);
        }
        let task = self
            .task
            .ok_or_else(|| Error::Config("--task or --config is required".into()))?;
        Ok(ExperimentConfig::new(task, self.space.build()?, self.scale.into(), &self.out))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| Error::Config(format!("{WORKERS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("{WORKERS_VAR}: {e}")))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenConfigs { scale, task, out } => gen_configs(scale.into(), task, &out),
        Command::Train {
            spec,
            seed,
            timesteps,
            eval_interval,
            cases,
        } => {
            let mut cfg = spec.build()?;
            if let Some(t) = timesteps {
                cfg.ppo.total_timesteps = t;
            }
            if let Some(i) = eval_interval {
                cfg.ppo.eval_interval = i;
            }
            if let Some(c) = cases {
                cfg.final_eval_cases = c;
            }
            if !seed.is_empty() {
                cfg.seeds = seed;
            }
            cfg.validate()?;
            for s in cfg.seeds.clone() {
                let m = experiment::run_seed(&cfg, s)?;
                println!("{} seed {s}: done ({} artifacts)", cfg.name(), m.artifacts.len());
            }
            Ok(())
        }
        Command::Evaluate {
            policy,
            task,
            space,
            cases,
            deterministic,
            out,
        } => evaluate(&policy, task, &space, cases, deterministic, &out),
        Command::Report { runs, out } => {
            let records = report::load_runs(&runs)?;
            if records.is_empty() {
                return Err(Error::Config(format!("no finished runs under {}", runs.display())));
            }
            let rows = report::table_rows(&report::group_runs(&records))?;
            for p in report::write_report(&rows, &out)? {
                println!("{}", p.display());
            }
            println!("aggregation: episodes pooled across seeds");
            Ok(())
        }
        Command::Plot { kind, runs, out } => plot_all(kind, &runs, &out),
    }
}

fn gen_configs(scale: Scale, task: Option<Task>, out: &Path) -> Result<()> {
    let plan = experiment::gen_configs(scale, out);
    let dir = out.join("configs");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut n = 0;
    for c in plan.configs.iter().filter(|c| task.is_none_or(|t| t == c.task)) {
        c.save(&dir.join(format!("{}.json", c.name())))?;
        n += 1;
    }
    let note = dir.join("grid_note.txt");
    std::fs::write(&note, format!("{}\n", plan.note)).map_err(|e| Error::Io { path: note, source: e })?;
    println!("wrote {n} configs to {}", dir.display());
    println!("{}", plan.note);
    Ok(())
}

fn evaluate(policy: &Path, task: Option<Task>, space: &SpaceArgs, cases: usize, deterministic: bool, out: &Path) -> Result<()> {
    let (task, space, file) = if policy.is_dir() {
        let run: TrainingRun = read_json(&policy.join(CONFIG_FILE))?;
        (run.task, run.space, policy.join(FINAL_POLICY_FILE))
    } else {
        let task = task.ok_or_else(|| Error::Config("--task is required with a policy file".into()))?;
        (task, space.build()?, policy.to_path_buf())
    };
    let net = checkpoint::load(&file)?;
    let episodes = experiment::evaluate_into(task, &space, &net, cases, deterministic, out)?;
    for m in Metric::table_columns(task) {
        println!("{:<24} IQM {:.4}", m.title(), iqm(&m.values(&episodes))?);
    }
    Ok(())
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    println!("{}", path.display());
    Ok(())
}

fn plot_all(kind: PlotKind, runs: &Path, out: &Path) -> Result<()> {
    let records = report::load_runs(runs)?;
    if records.is_empty() {
        return Err(Error::Config(format!("no finished runs under {}", runs.display())));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let want = |k: PlotKind| kind == PlotKind::All || kind == k;
    let groups = report::group_runs(&records);
    if want(PlotKind::Interval) {
        let intervals = report::interval_rows(&report::table_rows(&groups)?);
        for task in [Task::Inspection, Task::Docking] {
            for &metric in Metric::table_columns(task) {
                let mut umaxes: Vec<f64> = intervals.iter().filter(|r| r.task == task).map(|r| r.u_max).collect();
                umaxes.sort_by(|a, b| b.total_cmp(a));
                umaxes.dedup();
                let series: Vec<(String, Vec<Estimate>)> = umaxes
                    .iter()
                    .map(|u| {
                        let es = intervals
                            .iter()
                            .filter(|r| r.task == task && r.metric == metric && r.u_max == *u)
                            .map(|r| Estimate {
                                label: r.experiment.clone(),
                                iqm: r.iqm,
                                low: r.ci_low,
                                high: r.ci_high,
                            })
                            .collect();
                        (format!("u_max = {u} N"), es)
                    })
                    .collect();
                if series.is_empty() {
                    continue;
                }
                let title = format!("{} ({})", metric.title(), task.name());
                let svg = plot::interval_plot(&title, metric.title(), &series);
                write_svg(&out.join(format!("interval_{}_{}.svg", task.name(), metric.key())), &svg)?;
            }
        }
    }
    for g in &groups {
        let name = format!("{}_{}", g.task.name(), g.space.slug());
        let first: &RunRecord = g.runs[0];
        if want(PlotKind::Histogram) {
            let path = first.dir.join(HISTOGRAM_FILE);
            if path.exists() {
                let h = ActionHistogram::read_csv(&path)?;
                let title = format!("action usage: {} {}", g.task.name(), g.space.label());
                write_svg(&out.join(format!("histogram_{name}.svg")), &plot::histogram_plot(&title, &h))?;
            }
        }
        let traj = first.dir.join(TRAJECTORY_FILE);
        if traj.exists() && (want(PlotKind::Trajectory) || want(PlotKind::Speedlimit)) {
            let cols = trajectory::read(&traj)?;
            let title = format!("{} {} episode", g.task.name(), g.space.label());
            match g.task {
                Task::Inspection if want(PlotKind::Trajectory) => {
                    let svg = plot::inspection_trajectory_plot(&title, &cols, 10.0);
                    write_svg(&out.join(format!("trajectory_{name}.svg")), &svg)?;
                }
                Task::Docking => {
                    let cfg = DockingConfig::default();
                    if want(PlotKind::Trajectory) {
                        let svg = plot::docking_trajectory_plot(&title, &cols, cfg.dock_radius);
                        write_svg(&out.join(format!("trajectory_{name}.svg")), &svg)?;
                    }
                    if want(PlotKind::Speedlimit) {
                        let svg = plot::speed_limit_plot(&title, &cols, &cfg);
                        write_svg(&out.join(format!("speedlimit_{name}.svg")), &svg)?;
                    }
                }
                _ => {}
            }
        }
    }
    if want(PlotKind::Curves) {
        for task in [Task::Inspection, Task::Docking] {
            let task_groups: Vec<_> = groups.iter().filter(|g| g.task == task).collect();
            if task_groups.is_empty() {
                continue;
            }
            let mut metrics = Metric::table_columns(task).to_vec();
            metrics.push(Metric::FinalDistance);
            for metric in metrics {
                let series: Vec<(String, plot::Curve)> = task_groups
                    .iter()
                    .map(|g| Ok((g.space.label() + &format!(" ({} N)", g.space.u_max), report::sample_complexity(g, metric)?)))
                    .collect::<Result<_>>()?;
                let title = format!("sample complexity: {} ({})", metric.title(), task.name());
                write_svg(
                    &out.join(format!("curves_{}_{}.svg", task.name(), metric.key())),
                    &plot::curve_plot(&title, metric.title(), &series),
                )?;
            }
        }
    }
    Ok(())
}
