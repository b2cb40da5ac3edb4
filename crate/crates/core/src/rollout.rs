//! Experience collection and generalized advantage estimation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{ActionChoice, ActionKind, ActionSpaceSpec};
use crate::env::TaskEnv;
use crate::error::{Error, Result};
use crate::metrics::EpisodeMetrics;
use crate::net::PolicyValueNet;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStep {
    pub choice: ActionChoice,
    pub log_prob: f64,
    pub value: f64,
}

/// Anything that maps observations to actions.
pub trait Policy: Sync {
    fn act(&self, obs: &[f64], rng: &mut ChaCha8Rng, deterministic: bool) -> Result<PolicyStep>;
}

impl Policy for PolicyValueNet {
    fn act(&self, obs: &[f64], rng: &mut ChaCha8Rng, deterministic: bool) -> Result<PolicyStep> {
        let (dist, value) = self.forward(obs)?;
        let (choice, log_prob, _) = dist.sample(rng, deterministic);
        Ok(PolicyStep {
            choice,
            log_prob,
            value,
        })
    }
}

/// Uniformly random actions; the baseline every trained agent must beat.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub space: ActionSpaceSpec,
}

impl Policy for RandomPolicy {
    fn act(&self, _obs: &[f64], rng: &mut ChaCha8Rng, _deterministic: bool) -> Result<PolicyStep> {
        let choice = match &self.space.kind {
            ActionKind::Continuous => {
                let u = self.space.u_max;
                ActionChoice::Continuous([
                    rng.random_range(-u..=u),
                    rng.random_range(-u..=u),
                    rng.random_range(-u..=u),
                ])
            }
            _ => {
                let k = self.space.num_choices().expect("discrete");
                ActionChoice::Discrete([
                    rng.random_range(0..k),
                    rng.random_range(0..k),
                    rng.random_range(0..k),
                ])
            }
        };
        Ok(PolicyStep {
            choice,
            log_prob: 0.0,
            value: 0.0,
        })
    }
}

/// Contiguous steps gathered by one worker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    /// Value estimate of the observation following the last step.
    pub bootstrap_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<ActionChoice>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Empty until [`RolloutBuffer::compute_gae`] runs.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn append(&mut self, mut other: RolloutBuffer) {
        let offset = self.len();
        for s in &mut other.segments {
            s.start += offset;
        }
        self.observations.append(&mut other.observations);
        self.actions.append(&mut other.actions);
        self.log_probs.append(&mut other.log_probs);
        self.rewards.append(&mut other.rewards);
        self.values.append(&mut other.values);
        self.dones.append(&mut other.dones);
        self.segments.append(&mut other.segments);
    }

    /// Fills `advantages` and `returns`, segment by segment.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for seg in &self.segments {
            let r = seg.start..seg.start + seg.len;
            let (adv, ret) = gae(
                &self.rewards[r.clone()],
                &self.values[r.clone()],
                &self.dones[r.clone()],
                seg.bootstrap_value,
                gamma,
                lambda,
            );
            self.advantages[r.clone()].copy_from_slice(&adv);
            self.returns[r].copy_from_slice(&ret);
        }
    }
}

/// Generalized advantage estimation over one contiguous trajectory slice.
///
/// `dones[t]` marks that step `t` ended an episode, which cuts both the
/// bootstrap and the accumulation. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// One environment instance with its own random streams.
#[derive(Debug, Clone)]
pub struct RolloutWorker {
    env: TaskEnv,
    obs: Vec<f64>,
    action_rng: ChaCha8Rng,
    reset_rng: ChaCha8Rng,
    episode_steps: usize,
}

impl RolloutWorker {
    pub fn new(mut env: TaskEnv, master_seed: u64, index: u64) -> Self {
        let mut reset_rng = seed::indexed_rng(master_seed, Stream::EnvReset, index);
        let obs = env.reset(reset_rng.random());
        Self {
            env,
            obs,
            action_rng: seed::indexed_rng(master_seed, Stream::ActionSampling, index),
            reset_rng,
            episode_steps: 0,
        }
    }

    pub fn env_mut(&mut self) -> &mut TaskEnv {
        &mut self.env
    }

    fn collect(&mut self, policy: &dyn Policy, steps: usize) -> Result<(RolloutBuffer, Vec<EpisodeMetrics>)> {
        let mut buf = RolloutBuffer::default();
        let mut finished = Vec::new();
        for _ in 0..steps {
            let act = policy.act(&self.obs, &mut self.action_rng, false)?;
            let thrust = self.env.space().decode(&act.choice)?;
            let (t, _) = self.env.step_thrust(&thrust).map_err(|e| Error::EnvStep {
                step: self.episode_steps,
                source: Box::new(e),
            })?;
            self.episode_steps += 1;
            buf.observations.push(std::mem::take(&mut self.obs));
            buf.actions.push(act.choice);
            buf.log_probs.push(act.log_prob);
            buf.values.push(act.value);
            buf.rewards.push(t.reward);
            buf.dones.push(t.done);
            if t.done {
                finished.push(self.env.summary().expect("episode finished"));
                self.obs = self.env.reset(self.reset_rng.random());
                self.episode_steps = 0;
            } else {
                self.obs = t.observation;
            }
        }
        let last_done = *buf.dones.last().unwrap_or(&true);
        let bootstrap_value = if last_done {
            0.0
        } else {
            policy.act(&self.obs, &mut self.action_rng.clone(), true)?.value
        };
        buf.segments.push(Segment {
            start: 0,
            len: steps,
            bootstrap_value,
        });
        Ok((buf, finished))
    }
}

/// Gathers `steps_per_worker` transitions from every worker in parallel and
/// concatenates them in worker order. Episodes reset automatically; the
/// metrics of every episode that finished are returned alongside.
pub fn collect_rollout(
    workers: &mut [RolloutWorker],
    policy: &dyn Policy,
    steps_per_worker: usize,
) -> Result<(RolloutBuffer, Vec<EpisodeMetrics>)> {
    let parts: Vec<Result<(RolloutBuffer, Vec<EpisodeMetrics>)>> = workers
        .par_iter_mut()
        .map(|w| w.collect(policy, steps_per_worker))
        .collect();
    let mut buffer = RolloutBuffer::default();
    let mut finished = Vec::new();
    for p in parts {
        let (b, f) = p?;
        buffer.append(b);
        finished.extend(f);
    }
    Ok((buffer, finished))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (adv, ret) = gae(&[2.0], &[0.5], &[true], 9.0, 0.99, 0.95);
        assert_eq!(adv, vec![1.5]);
        assert_eq!(ret, vec![2.0]);
    }

    #[test]
    fn undiscounted_reward_to_go() {
        let r = [1.0, -2.0, 0.5, 3.0, 1.0];
        let d = [false, false, true, false, true];
        let (adv, _) = gae(&r, &[0.0; 5], &d, 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![-0.5, -1.5, 0.5, 4.0, 1.0]);
    }

    #[test]
    fn bootstrap_used_when_not_done() {
        let (adv, _) = gae(&[0.0], &[0.0], &[false], 2.0, 0.5, 1.0);
        assert_eq!(adv, vec![1.0]);
    }
}
