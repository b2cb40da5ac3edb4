//! Proximal Policy Optimization trainer.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::ActionSpaceSpec;
use crate::checkpoint;
use crate::env::{Task, TaskEnv};
use crate::error::{Error, Result};
use crate::inspection::{adaptive_w_update, W_MIN};
use crate::metrics::{evaluate_policy, iqm, EpisodeMetrics, Metric};
use crate::net::{clip_grad_norm, Adam, LossSpec, NetConfig, PolicyValueNet, Sample};
use crate::rollout::{collect_rollout, RolloutBuffer, RolloutWorker};
use crate::seed::{self, Stream};

/// Reset seeds of the fixed test cases scored during training.
pub const TRAINING_EVAL_SEED_BASE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 5M timesteps, evaluation every 500k.
    Paper,
    /// 300k timesteps, evaluation every 30k.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::config(format!("unknown scale `{other}` (paper|desk)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub total_timesteps: usize,
    /// Transitions per iteration, summed over all environments.
    pub rollout_length: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero over the run.
    #[serde(default)]
    pub anneal_lr: bool,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub eval_interval: usize,
    pub num_eval_cases: usize,
    pub seed: u64,
    /// Parallel environment instances; `rollout_length` is split evenly.
    pub num_envs: usize,
    pub hidden: Vec<usize>,
}

impl PpoConfig {
    pub fn for_space(space: &ActionSpaceSpec, scale: Scale) -> Self {
        let (total_timesteps, eval_interval) = match scale {
            Scale::Paper => (5_000_000, 500_000),
            Scale::Desk => (300_000, 30_000),
        };
        Self {
            total_timesteps,
            rollout_length: 4096,
            minibatch_size: 256,
            epochs: 10,
            clip_eps: 0.2,
            gamma: 0.98,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            anneal_lr: true,
            entropy_coef: if space.is_discrete() { 0.0 } else { 0.005 },
            value_coef: 0.5,
            max_grad_norm: 0.5,
            eval_interval,
            num_eval_cases: 10,
            seed: 0,
            num_envs: 8,
            hidden: vec![64, 64],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(Error::config("gamma and lambda must lie in (0, 1]"));
        }
        if !(self.clip_eps > 0.0) || !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::config("clip epsilon, learning rate and gradient cap must be positive"));
        }
        if !(self.entropy_coef >= 0.0) || !(self.value_coef >= 0.0) {
            return Err(Error::config("loss coefficients must be non-negative"));
        }
        if self.minibatch_size == 0 || self.rollout_length % self.minibatch_size != 0 {
            return Err(Error::config("rollout length must be a positive multiple of the minibatch size"));
        }
        if self.num_envs == 0 || self.rollout_length % self.num_envs != 0 {
            return Err(Error::config("rollout length must divide evenly across environments"));
        }
        if self.total_timesteps == 0 || self.eval_interval == 0 || self.epochs == 0 {
            return Err(Error::config("timesteps, eval interval and epochs must be positive"));
        }
        if self.num_eval_cases == 0 || self.hidden.is_empty() {
            return Err(Error::config("need at least one eval case and one hidden layer"));
        }
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.total_timesteps.div_ceil(self.rollout_length)
    }

    pub fn num_evaluations(&self) -> usize {
        self.total_timesteps.div_ceil(self.eval_interval)
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            clip_eps: self.clip_eps,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Averages over all minibatch updates of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    /// Clip fraction of the first epoch only.
    pub first_epoch_clip_fraction: f64,
}

/// Shifts and scales to mean 0, std 1; the std is floored at 1e-8.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = 1.0 / std.max(1e-8);
    for a in adv {
        *a = (*a - mean) * scale;
    }
}

/// Runs the clipped-surrogate update over a GAE-processed buffer.
pub fn ppo_update(
    net: &mut PolicyValueNet,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainStats> {
    if buffer.advantages.len() != buffer.len() {
        return Err(Error::domain("advantages not computed"));
    }
    let mut adv = buffer.advantages.clone();
    normalize_advantages(&mut adv);
    let samples: Vec<Sample> = (0..buffer.len())
        .map(|i| Sample {
            obs: buffer.observations[i].clone(),
            action: buffer.actions[i],
            old_log_prob: buffer.log_probs[i],
            advantage: adv[i],
            value_target: buffer.returns[i],
        })
        .collect();
    let spec = cfg.loss_spec();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut stats = TrainStats::default();
    let mut updates = 0usize;
    let mut first_epoch = (0.0, 0usize);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(cfg.minibatch_size) {
            let batch: Vec<Sample> = idx.iter().map(|&i| samples[i].clone()).collect();
            let (ls, mut grad) = net.gradients(&spec, &batch).map_err(|e| match e {
                Error::NonFiniteLoss { index } => Error::NonFiniteLoss { index: idx[index] },
                other => other,
            })?;
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(net.params_mut(), &grad);
            stats.policy_loss += ls.policy_loss;
            stats.value_loss += ls.value_loss;
            stats.entropy += ls.entropy;
            stats.mean_ratio += ls.mean_ratio;
            stats.clip_fraction += ls.clip_fraction;
            stats.approx_kl += ls.approx_kl;
            stats.grad_norm += norm;
            updates += 1;
            if epoch == 0 {
                first_epoch.0 += ls.clip_fraction;
                first_epoch.1 += 1;
            }
        }
    }
    let inv = 1.0 / updates.max(1) as f64;
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.mean_ratio *= inv;
    stats.clip_fraction *= inv;
    stats.approx_kl *= inv;
    stats.grad_norm *= inv;
    stats.first_epoch_clip_fraction = first_epoch.0 / first_epoch.1.max(1) as f64;
    Ok(stats)
}

/// One row of the sample-complexity log: IQMs over the fixed test cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub timestep: usize,
    pub total_reward: f64,
    pub success: f64,
    pub delta_v: f64,
    pub episode_length: f64,
    pub final_distance: f64,
    pub inspected_points: Option<f64>,
    pub violation_percent: Option<f64>,
    pub final_speed: Option<f64>,
}

impl EvalRecord {
    pub fn from_episodes(timestep: usize, episodes: &[EpisodeMetrics]) -> Result<Self> {
        let m = |metric: Metric| -> Result<Option<f64>> {
            let v = metric.values(episodes);
            if v.is_empty() {
                Ok(None)
            } else {
                iqm(&v).map(Some)
            }
        };
        let req = |metric: Metric| -> Result<f64> {
            m(metric)?.ok_or_else(|| Error::domain("no evaluation episodes"))
        };
        Ok(Self {
            timestep,
            total_reward: req(Metric::TotalReward)?,
            success: req(Metric::Success)?,
            delta_v: req(Metric::DeltaV)?,
            episode_length: req(Metric::EpisodeLength)?,
            final_distance: req(Metric::FinalDistance)?,
            inspected_points: m(Metric::InspectedPoints)?,
            violation_percent: m(Metric::ViolationPercent)?,
            final_speed: m(Metric::FinalSpeed)?,
        })
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::TotalReward => Some(self.total_reward),
            Metric::Success => Some(self.success),
            Metric::DeltaV => Some(self.delta_v),
            Metric::EpisodeLength => Some(self.episode_length),
            Metric::FinalDistance => Some(self.final_distance),
            Metric::InspectedPoints => self.inspected_points,
            Metric::ViolationPercent => self.violation_percent,
            Metric::FinalSpeed => self.final_speed,
            Metric::InitialDistance => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub timesteps: usize,
    /// Fuel weight used during this iteration (inspection only).
    pub w: Option<f64>,
    pub episodes: usize,
    pub mean_return: Option<f64>,
    pub mean_success: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

/// What one agent's training run needs: the config snapshot of a run dir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub task: Task,
    pub space: ActionSpaceSpec,
    pub ppo: PpoConfig,
}

pub const CONFIG_FILE: &str = "config.json";
pub const EVAL_LOG_FILE: &str = "eval_log.csv";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const FINAL_POLICY_FILE: &str = "final_policy.bin";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub net: PolicyValueNet,
    pub eval_log: Vec<EvalRecord>,
    pub train_log: Vec<IterationRecord>,
    /// Fuel weight after the last iteration (inspection only).
    pub final_w: Option<f64>,
    pub checkpoints: Vec<PathBuf>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Trains one agent. With `run_dir`, the config snapshot, both logs, a
/// checkpoint per evaluation and the final policy are written there.
pub fn train(task: Task, space: &ActionSpaceSpec, cfg: &PpoConfig, run_dir: Option<&Path>) -> Result<RunArtifacts> {
    cfg.validate()?;
    space.validate()?;
    if let Some(dir) = run_dir {
        std::fs::create_dir_all(dir.join(CHECKPOINT_DIR)).map_err(|e| Error::io(dir, e))?;
        let run = TrainingRun {
            task,
            space: space.clone(),
            ppo: cfg.clone(),
        };
        write_json(&dir.join(CONFIG_FILE), &run)?;
    }

    let net_cfg = NetConfig {
        hidden: cfg.hidden.clone(),
        ..NetConfig::standard(task.obs_dim(), space)
    };
    let mut net = PolicyValueNet::init(net_cfg, &mut seed::stream_rng(cfg.seed, Stream::PolicyInit))?;
    let mut adam = Adam::new(net.num_params(), cfg.learning_rate);
    let mut shuffle_rng = seed::stream_rng(cfg.seed, Stream::MinibatchShuffle);
    let proto = TaskEnv::new(task, space.clone(), false)?;
    let mut w = (task == Task::Inspection).then_some(W_MIN);
    let mut workers: Vec<RolloutWorker> = (0..cfg.num_envs as u64)
        .map(|i| {
            let mut env = proto.clone();
            if let Some(w) = w {
                env.set_fuel_weight(w);
            }
            RolloutWorker::new(env, cfg.seed, i)
        })
        .collect();
    let steps_per_worker = cfg.rollout_length / cfg.num_envs;

    let mut eval_log = Vec::new();
    let mut train_log = Vec::new();
    let mut checkpoints = Vec::new();
    let mut timesteps = 0usize;
    let mut next_eval = 1usize;
    let evaluations = cfg.num_evaluations();
    let mut evaluate = |net: &PolicyValueNet, timesteps: usize, eval_log: &mut Vec<EvalRecord>| -> Result<()> {
        let episodes = evaluate_policy(task, space, net, cfg.num_eval_cases, TRAINING_EVAL_SEED_BASE, true)?;
        eval_log.push(EvalRecord::from_episodes(timesteps, &episodes)?);
        if let Some(dir) = run_dir {
            let path = dir.join(CHECKPOINT_DIR).join(format!("step_{timesteps:09}.bin"));
            checkpoint::save(net, &path)?;
            checkpoints.push(path);
        }
        Ok(())
    };

    let iterations = cfg.iterations();
    for iteration in 0..iterations {
        if cfg.anneal_lr {
            adam.lr = cfg.learning_rate * (1.0 - iteration as f64 / iterations as f64);
        }
        if let Some(w) = w {
            for wk in &mut workers {
                wk.env_mut().set_fuel_weight(w);
            }
        }
        let (mut buffer, finished) = collect_rollout(&mut workers, &net, steps_per_worker)?;
        buffer.compute_gae(cfg.gamma, cfg.gae_lambda);
        let stats = ppo_update(&mut net, &mut adam, &buffer, cfg, &mut shuffle_rng)?;
        timesteps += buffer.len();

        let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| {
            (!finished.is_empty()).then(|| finished.iter().map(f).sum::<f64>() / finished.len() as f64)
        };
        train_log.push(IterationRecord {
            iteration,
            timesteps,
            w,
            episodes: finished.len(),
            mean_return: mean(&|m| m.total_reward),
            mean_success: mean(&|m| m.success as f64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            mean_ratio: stats.mean_ratio,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
            grad_norm: stats.grad_norm,
        });
        if let (Some(current), Some(frac)) = (
            w,
            mean(&|m| m.inspected_points.unwrap_or(0) as f64 / crate::inspection::NUM_POINTS as f64),
        ) {
            w = Some(adaptive_w_update(current, frac));
        }

        let mut due = false;
        while next_eval <= evaluations && next_eval * cfg.eval_interval <= timesteps {
            due = true;
            next_eval += 1;
        }
        if due {
            // one evaluation per crossed interval keeps the log length fixed
            let before = eval_log.len();
            evaluate(&net, timesteps, &mut eval_log)?;
            let row = eval_log[before].clone();
            let crossed = next_eval - 1 - before;
            for _ in 1..crossed {
                eval_log.push(row.clone());
            }
        }
    }
    while eval_log.len() < evaluations {
        evaluate(&net, timesteps, &mut eval_log)?;
    }

    if let Some(dir) = run_dir {
        write_csv(&dir.join(EVAL_LOG_FILE), &eval_log)?;
        write_csv(&dir.join(TRAIN_LOG_FILE), &train_log)?;
        checkpoint::save(&net, &dir.join(FINAL_POLICY_FILE))?;
    }
    Ok(RunArtifacts {
        net,
        eval_log,
        train_log,
        final_w: w,
        checkpoints,
    })
}
