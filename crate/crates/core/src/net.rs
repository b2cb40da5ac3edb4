//! Policy and value multilayer perceptrons with hand-written gradients.
//!
//! All parameters live in one flat `Vec<f64>` so that the optimizer, the
//! checkpoint format and gradient checks can treat them uniformly. Layout:
//!
//! ```text
//! [policy layers (W row-major, then b) ..., log_std (Gaussian only), value layers ...]
//! ```
//!
//! Discrete heads emit `3 x K` logits, one independent categorical per
//! thrust axis. Continuous heads emit 3 means and use a state-independent
//! learnable log standard deviation per axis.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{ActionChoice, ActionSpaceSpec};
use crate::error::{Error, Result};

pub const AXES: usize = 3;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.837_877_066_409_345_3;
const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HeadKind {
    Categorical { choices: usize },
    Gaussian,
}

impl HeadKind {
    pub fn for_space(space: &ActionSpaceSpec) -> Self {
        match space.num_choices() {
            Some(choices) => HeadKind::Categorical { choices },
            None => HeadKind::Gaussian,
        }
    }

    fn outputs(&self) -> usize {
        match self {
            HeadKind::Categorical { choices } => AXES * choices,
            HeadKind::Gaussian => AXES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub head: HeadKind,
    /// Initial per-axis log standard deviation (Gaussian head only).
    pub init_log_std: f64,
    pub policy_output_gain: f64,
    pub value_output_gain: f64,
}

impl NetConfig {
    /// Two 64-unit tanh layers for each trunk; Gaussian exploration starts
    /// at half the thrust range.
    pub fn standard(obs_dim: usize, space: &ActionSpaceSpec) -> Self {
        Self {
            obs_dim,
            hidden: vec![64, 64],
            head: HeadKind::for_space(space),
            init_log_std: (0.5 * space.u_max).ln(),
            policy_output_gain: 0.01,
            value_output_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl Dense {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

fn build_stack(sizes: &[usize], offset: &mut usize) -> Vec<Dense> {
    sizes
        .windows(2)
        .map(|w| {
            let d = Dense {
                inputs: w[0],
                outputs: w[1],
                offset: *offset,
            };
            *offset += d.len();
            d
        })
        .collect()
}

/// Per-axis action distribution produced by the policy head.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    /// `logits[axis * choices + j]`
    Categorical { choices: usize, logits: Vec<f64> },
    Gaussian { mean: [f64; AXES], log_std: [f64; AXES] },
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

impl ActionDistribution {
    /// Softmax probabilities of one axis.
    pub fn probs(&self, axis: usize) -> Vec<f64> {
        match self {
            ActionDistribution::Categorical { choices, logits } => {
                log_softmax(&logits[axis * choices..(axis + 1) * choices])
                    .into_iter()
                    .map(f64::exp)
                    .collect()
            }
            ActionDistribution::Gaussian { .. } => Vec::new(),
        }
    }

    /// Sum over axes of per-axis log densities.
    pub fn log_prob(&self, choice: &ActionChoice) -> Result<f64> {
        match (self, choice) {
            (ActionDistribution::Categorical { choices, logits }, ActionChoice::Discrete(idx)) => {
                let mut total = 0.0;
                for (axis, &i) in idx.iter().enumerate() {
                    if i >= *choices {
                        return Err(Error::domain(format!("action index {i} >= {choices}")));
                    }
                    total += log_softmax(&logits[axis * choices..(axis + 1) * choices])[i];
                }
                Ok(total)
            }
            (ActionDistribution::Gaussian { mean, log_std }, ActionChoice::Continuous(a)) => {
                Ok((0..AXES)
                    .map(|k| {
                        let z = (a[k] - mean[k]) / log_std[k].exp();
                        -0.5 * z * z - log_std[k] - 0.5 * LN_2PI
                    })
                    .sum())
            }
            _ => Err(Error::domain("action kind does not match the distribution")),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDistribution::Categorical { choices, logits } => (0..AXES)
                .map(|axis| {
                    let lp = log_softmax(&logits[axis * choices..(axis + 1) * choices]);
                    -lp.iter().map(|l| l.exp() * l).sum::<f64>()
                })
                .sum(),
            ActionDistribution::Gaussian { log_std, .. } => {
                log_std.iter().map(|s| 0.5 + 0.5 * LN_2PI + s).sum()
            }
        }
    }

    /// Draws an action, or takes the per-axis mode when `deterministic`.
    ///
    /// Continuous draws are returned unclamped; the log-probability refers
    /// to the raw draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, deterministic: bool) -> (ActionChoice, f64, f64) {
        let choice = match self {
            ActionDistribution::Categorical { choices, logits } => {
                let mut idx = [0usize; AXES];
                for (axis, out) in idx.iter_mut().enumerate() {
                    let row = &logits[axis * choices..(axis + 1) * choices];
                    *out = if deterministic {
                        argmax(row)
                    } else {
                        let probs = self.probs(axis);
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut pick = choices - 1;
                        for (j, p) in probs.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                pick = j;
                                break;
                            }
                        }
                        pick
                    };
                }
                ActionChoice::Discrete(idx)
            }
            ActionDistribution::Gaussian { mean, log_std } => {
                let mut a = *mean;
                if !deterministic {
                    for k in 0..AXES {
                        let eps: f64 = StandardNormal.sample(rng);
                        a[k] += log_std[k].exp() * eps;
                    }
                }
                ActionChoice::Continuous(a)
            }
        };
        let log_prob = self.log_prob(&choice).expect("choice drawn from this distribution");
        (choice, log_prob, self.entropy())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Coefficients of the PPO objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// One training sample for the PPO objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: ActionChoice,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

/// Batch-mean loss terms and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

impl LossStats {
    fn add(&mut self, o: &LossStats) {
        self.loss += o.loss;
        self.policy_loss += o.policy_loss;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.mean_ratio += o.mean_ratio;
        self.clip_fraction += o.clip_fraction;
        self.approx_kl += o.approx_kl;
    }

    fn scale(&mut self, s: f64) {
        self.loss *= s;
        self.policy_loss *= s;
        self.value_loss *= s;
        self.entropy *= s;
        self.mean_ratio *= s;
        self.clip_fraction *= s;
        self.approx_kl *= s;
    }
}

struct Trace {
    /// Inputs to each layer followed by the final output.
    policy: Vec<Vec<f64>>,
    value: Vec<Vec<f64>>,
}

/// Policy and value networks sharing one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    cfg: NetConfig,
    policy: Vec<Dense>,
    value: Vec<Dense>,
    log_std: Option<usize>,
    params: Vec<f64>,
}

impl PolicyValueNet {
    /// All-zero parameters (log-std at its initial value).
    pub fn zeros(cfg: NetConfig) -> Result<Self> {
        if cfg.obs_dim == 0 || cfg.hidden.iter().any(|h| *h == 0) {
            return Err(Error::config("network layer sizes must be positive"));
        }
        if let HeadKind::Categorical { choices } = cfg.head {
            if choices < 2 {
                return Err(Error::config("categorical head needs at least two choices"));
            }
        }
        let mut offset = 0;
        let mut sizes = vec![cfg.obs_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(cfg.head.outputs());
        let policy = build_stack(&sizes, &mut offset);
        let log_std = match cfg.head {
            HeadKind::Gaussian => {
                let o = offset;
                offset += AXES;
                Some(o)
            }
            HeadKind::Categorical { .. } => None,
        };
        *sizes.last_mut().unwrap() = 1;
        let value = build_stack(&sizes, &mut offset);
        let mut params = vec![0.0; offset];
        if let Some(o) = log_std {
            params[o..o + AXES].fill(cfg.init_log_std);
        }
        Ok(Self {
            cfg,
            policy,
            value,
            log_std,
            params,
        })
    }

    /// Orthogonal initialization: hidden layers with gain sqrt(2), output
    /// layers with the configured gains, zero biases.
    pub fn init<R: Rng + ?Sized>(cfg: NetConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(cfg)?;
        let hidden_gain = 2f64.sqrt();
        let layers: Vec<(Dense, f64)> = {
            let np = net.policy.len();
            let nv = net.value.len();
            net.policy
                .iter()
                .enumerate()
                .map(|(i, d)| (*d, if i + 1 == np { net.cfg.policy_output_gain } else { hidden_gain }))
                .chain(net.value.iter().enumerate().map(|(i, d)| {
                    (*d, if i + 1 == nv { net.cfg.value_output_gain } else { hidden_gain })
                }))
                .collect()
        };
        for (d, gain) in layers {
            let w = orthogonal(d.outputs, d.inputs, gain, rng);
            net.params[d.weights()].copy_from_slice(&w);
        }
        Ok(net)
    }

    pub fn from_params(cfg: NetConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(cfg)?;
        if params.len() != net.params.len() {
            return Err(Error::domain(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("non-finite parameter"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Flat index of the value head's output bias.
    pub fn value_output_bias_index(&self) -> usize {
        self.value.last().unwrap().biases().start
    }

    fn run_stack(&self, layers: &[Dense], obs: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(obs.to_vec());
        for (li, d) in layers.iter().enumerate() {
            let x = acts.last().unwrap();
            let w = &self.params[d.weights()];
            let b = &self.params[d.biases()];
            let last = li + 1 == layers.len();
            let y: Vec<f64> = (0..d.outputs)
                .map(|o| {
                    let row = &w[o * d.inputs..(o + 1) * d.inputs];
                    let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(y);
        }
        acts
    }

    fn trace(&self, obs: &[f64]) -> Result<Trace> {
        if obs.len() != self.cfg.obs_dim {
            return Err(Error::domain(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.cfg.obs_dim
            )));
        }
        Ok(Trace {
            policy: self.run_stack(&self.policy, obs),
            value: self.run_stack(&self.value, obs),
        })
    }

    fn distribution_from(&self, head: &[f64]) -> ActionDistribution {
        match self.cfg.head {
            HeadKind::Categorical { choices } => ActionDistribution::Categorical {
                choices,
                logits: head.to_vec(),
            },
            HeadKind::Gaussian => {
                let o = self.log_std.expect("gaussian head");
                let mut log_std = [0.0; AXES];
                for (k, s) in log_std.iter_mut().enumerate() {
                    *s = self.params[o + k].clamp(LOG_STD_MIN, LOG_STD_MAX);
                }
                ActionDistribution::Gaussian {
                    mean: [head[0], head[1], head[2]],
                    log_std,
                }
            }
        }
    }

    pub fn forward(&self, obs: &[f64]) -> Result<(ActionDistribution, f64)> {
        let t = self.trace(obs)?;
        Ok((
            self.distribution_from(t.policy.last().unwrap()),
            t.value.last().unwrap()[0],
        ))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        if obs.len() != self.cfg.obs_dim {
            return Err(Error::domain("observation length mismatch"));
        }
        Ok(self.run_stack(&self.value, obs).last().unwrap()[0])
    }

    fn backprop(&self, layers: &[Dense], acts: &[Vec<f64>], out_grad: Vec<f64>, grad: &mut [f64]) {
        let mut delta = out_grad;
        for (li, d) in layers.iter().enumerate().rev() {
            let x = &acts[li];
            let wr = d.weights();
            let br = d.biases();
            for o in 0..d.outputs {
                let g = delta[o];
                if g == 0.0 {
                    continue;
                }
                grad[br.start + o] += g;
                let row = &mut grad[wr.start + o * d.inputs..wr.start + (o + 1) * d.inputs];
                for (r, xi) in row.iter_mut().zip(x) {
                    *r += g * xi;
                }
            }
            if li == 0 {
                break;
            }
            let w = &self.params[wr];
            let mut prev = vec![0.0; d.inputs];
            for o in 0..d.outputs {
                let g = delta[o];
                if g == 0.0 {
                    continue;
                }
                let row = &w[o * d.inputs..(o + 1) * d.inputs];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += wi * g;
                }
            }
            // previous activation is tanh
            for (p, xi) in prev.iter_mut().zip(x) {
                *p *= 1.0 - xi * xi;
            }
            delta = prev;
        }
    }

    /// Loss of one sample and, when `grad` is given, its gradient added in.
    fn sample_loss(&self, spec: &LossSpec, s: &Sample, grad: Option<&mut [f64]>) -> Result<LossStats> {
        let t = self.trace(&s.obs)?;
        let head = t.policy.last().unwrap();
        let dist = self.distribution_from(head);
        let log_prob = dist.log_prob(&s.action)?;
        let entropy = dist.entropy();
        let value = t.value.last().unwrap()[0];

        let log_ratio = log_prob - s.old_log_prob;
        let ratio = log_ratio.exp();
        let a = s.advantage;
        let lo = 1.0 - spec.clip_eps;
        let hi = 1.0 + spec.clip_eps;
        let unclipped = ratio * a;
        let clipped = ratio.clamp(lo, hi) * a;
        let policy_loss = -unclipped.min(clipped);
        let value_err = value - s.value_target;
        let value_loss = value_err * value_err;
        let loss = policy_loss + spec.value_coef * value_loss - spec.entropy_coef * entropy;
        let stats = LossStats {
            loss,
            policy_loss,
            value_loss,
            entropy,
            mean_ratio: ratio,
            clip_fraction: if (ratio - 1.0).abs() > spec.clip_eps { 1.0 } else { 0.0 },
            approx_kl: (ratio - 1.0) - log_ratio,
        };
        let Some(grad) = grad else {
            return Ok(stats);
        };

        // d loss / d log_prob through the clipped surrogate
        let active = if a >= 0.0 { ratio <= hi } else { ratio >= lo };
        let dlogp = if active { -a * ratio } else { 0.0 };
        let ent = spec.entropy_coef;

        let mut head_grad = vec![0.0; head.len()];
        match (&dist, &s.action) {
            (ActionDistribution::Categorical { choices, .. }, ActionChoice::Discrete(idx)) => {
                for axis in 0..AXES {
                    let probs = dist.probs(axis);
                    let h_axis: f64 = -probs.iter().map(|p| if *p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>();
                    for (j, p) in probs.iter().enumerate() {
                        let onehot = if j == idx[axis] { 1.0 } else { 0.0 };
                        let dh = if *p > 0.0 { -p * (p.ln() + h_axis) } else { 0.0 };
                        head_grad[axis * choices + j] = dlogp * (onehot - p) - ent * dh;
                    }
                }
            }
            (ActionDistribution::Gaussian { mean, log_std }, ActionChoice::Continuous(act)) => {
                let o = self.log_std.expect("gaussian head");
                for k in 0..AXES {
                    let var = (2.0 * log_std[k]).exp();
                    let diff = act[k] - mean[k];
                    head_grad[k] = dlogp * diff / var;
                    let raw = self.params[o + k];
                    if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                        grad[o + k] += dlogp * (diff * diff / var - 1.0) - ent;
                    }
                }
            }
            _ => return Err(Error::domain("action kind does not match the head")),
        }
        self.backprop(&self.policy, &t.policy, head_grad, grad);
        self.backprop(&self.value, &t.value, vec![spec.value_coef * 2.0 * value_err], grad);
        Ok(stats)
    }

    fn batch_eval(&self, spec: &LossSpec, batch: &[Sample], want_grad: bool) -> Result<(LossStats, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        let n = self.params.len();
        // chunks are reduced in index order, so the result does not depend on scheduling
        let partial: Vec<Result<(LossStats, Vec<f64>)>> = batch
            .par_chunks(GRAD_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut grad = if want_grad { vec![0.0; n] } else { Vec::new() };
                let mut stats = LossStats::default();
                for (k, s) in chunk.iter().enumerate() {
                    let st = self.sample_loss(spec, s, want_grad.then_some(grad.as_mut_slice()))?;
                    if !st.loss.is_finite() {
                        return Err(Error::NonFiniteLoss {
                            index: ci * GRAD_CHUNK + k,
                        });
                    }
                    stats.add(&st);
                }
                Ok((stats, grad))
            })
            .collect();
        let mut total = LossStats::default();
        let mut grad = if want_grad { vec![0.0; n] } else { Vec::new() };
        for p in partial {
            let (s, g) = p?;
            total.add(&s);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        total.scale(inv);
        for g in &mut grad {
            *g *= inv;
        }
        Ok((total, grad))
    }

    /// Batch-mean PPO loss.
    pub fn loss(&self, spec: &LossSpec, batch: &[Sample]) -> Result<LossStats> {
        Ok(self.batch_eval(spec, batch, false)?.0)
    }

    /// Batch-mean PPO loss and its gradient with respect to every parameter.
    pub fn gradients(&self, spec: &LossSpec, batch: &[Sample]) -> Result<(LossStats, Vec<f64>)> {
        self.batch_eval(spec, batch, true)
    }
}

fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (r, c) = (rows.max(cols), rows.min(cols));
    let g = DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let rm = qr.r();
    for j in 0..c {
        if rm[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(gain * q[(i, j)]);
        }
    }
    out
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn cfg(head: HeadKind) -> NetConfig {
        NetConfig {
            obs_dim: 5,
            hidden: vec![6, 4],
            head,
            init_log_std: (0.5f64).ln(),
            policy_output_gain: 0.01,
            value_output_gain: 1.0,
        }
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = PolicyValueNet::zeros(cfg(HeadKind::Categorical { choices: 7 })).unwrap();
        let (dist, v) = net.forward(&[0.3; 5]).unwrap();
        assert_eq!(v, 0.0);
        for axis in 0..AXES {
            for p in dist.probs(axis) {
                assert!((p - 1.0 / 7.0).abs() < 1e-15);
            }
        }
        let net = PolicyValueNet::zeros(cfg(HeadKind::Gaussian)).unwrap();
        let (dist, _) = net.forward(&[0.3; 5]).unwrap();
        assert_eq!(
            dist,
            ActionDistribution::Gaussian {
                mean: [0.0; 3],
                log_std: [(0.5f64).ln(); 3]
            }
        );
    }

    #[test]
    fn shape_mismatch() {
        let net = PolicyValueNet::zeros(cfg(HeadKind::Gaussian)).unwrap();
        assert!(net.forward(&[0.0; 4]).is_err());
        assert!(PolicyValueNet::from_params(cfg(HeadKind::Gaussian), vec![0.0; 3]).is_err());
    }

    #[test]
    fn analytic_entropy_and_density() {
        let d = ActionDistribution::Categorical {
            choices: 3,
            logits: vec![0.0; 9],
        };
        assert!((d.entropy() - 3.0 * 3f64.ln()).abs() < 1e-12);
        let g = ActionDistribution::Gaussian {
            mean: [0.1, -0.2, 0.3],
            log_std: [0.0; 3],
        };
        let lp = g.log_prob(&ActionChoice::Continuous([0.1, -0.2, 0.3])).unwrap();
        assert!((lp + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        assert!((lp + 2.7568).abs() < 1e-4);
    }

    #[test]
    fn deterministic_mode_is_argmax() {
        let d = ActionDistribution::Categorical {
            choices: 3,
            logits: vec![0.1, 2.0, 0.3, 0.1, 2.0, 0.3, 5.0, 2.0, 0.3],
        };
        let mut rng = seed::episode_rng(0);
        let (c, _, _) = d.sample(&mut rng, true);
        assert_eq!(c, ActionChoice::Discrete([1, 1, 0]));
    }

    #[test]
    fn softmax_normalizes_extreme_logits() {
        let d = ActionDistribution::Categorical {
            choices: 4,
            logits: vec![1000.0, -1000.0, 3.0, 999.0, 0.0, 0.0, 0.0, 0.0, -700.0, 700.0, 1e-3, 5.0],
        };
        for axis in 0..AXES {
            let s: f64 = d.probs(axis).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(d.entropy().is_finite());
    }

    #[test]
    fn value_bias_gradient() {
        let mut rng = seed::episode_rng(1);
        let net = PolicyValueNet::init(cfg(HeadKind::Categorical { choices: 3 }), &mut rng).unwrap();
        let obs = vec![0.1, 0.2, -0.3, 0.4, 0.0];
        let v = net.value(&obs).unwrap();
        let spec = LossSpec {
            clip_eps: 0.2,
            value_coef: 1.0,
            entropy_coef: 0.0,
        };
        let sample = Sample {
            obs,
            action: ActionChoice::Discrete([0, 1, 2]),
            old_log_prob: 0.0,
            advantage: 0.0,
            value_target: 1.5,
        };
        let (_, g) = net.gradients(&spec, &[sample]).unwrap();
        let expected = 2.0 * (v - 1.5);
        assert!((g[net.value_output_bias_index()] - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_advantage_has_no_policy_gradient() {
        let mut rng = seed::episode_rng(2);
        let net = PolicyValueNet::init(cfg(HeadKind::Gaussian), &mut rng).unwrap();
        let spec = LossSpec {
            clip_eps: 0.2,
            value_coef: 0.0,
            entropy_coef: 0.0,
        };
        let batch: Vec<Sample> = (0..8)
            .map(|i| Sample {
                obs: vec![i as f64 * 0.1; 5],
                action: ActionChoice::Continuous([0.1, 0.2, -0.1]),
                old_log_prob: -1.0,
                advantage: 0.0,
                value_target: 0.3,
            })
            .collect();
        let (stats, g) = net.gradients(&spec, &batch).unwrap();
        assert_eq!(stats.policy_loss, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn non_finite_loss_reports_index() {
        let net = PolicyValueNet::zeros(cfg(HeadKind::Gaussian)).unwrap();
        let spec = LossSpec {
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
        };
        let mut batch: Vec<Sample> = (0..40)
            .map(|_| Sample {
                obs: vec![0.0; 5],
                action: ActionChoice::Continuous([0.0; 3]),
                old_log_prob: 0.0,
                advantage: 1.0,
                value_target: 0.0,
            })
            .collect();
        batch[37].value_target = f64::INFINITY;
        match net.gradients(&spec, &batch) {
            Err(Error::NonFiniteLoss { index }) => assert_eq!(index, 37),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn orthogonal_columns() {
        let mut rng = seed::episode_rng(3);
        let w = orthogonal(8, 5, 1.0, &mut rng);
        let m = DMatrix::from_row_slice(8, 5, &w);
        let gram = m.transpose() * &m;
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-12);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = vec![1.0, -1.0];
        let mut adam = Adam::new(2, 0.1);
        adam.step(&mut p, &[2.0, -3.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
    }
}
