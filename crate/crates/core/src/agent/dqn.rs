//! Deep Q-learning: TD targets from a periodically synced target copy,
//! uniform experience replay and epsilon-greedy acting.

use rand::Rng;

use super::network::{argmax, QNetwork};
use super::optim::{Optimizer, OptimizerKind};
use super::replay::{Batch, ReplayBuffer};
use crate::env::Environment;
use crate::{stream_rng, Error, Result};

const INIT_STREAM: u64 = 10;
const AGENT_STREAM: u64 = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct DqnHyper {
    pub gamma: f64,
    pub lr: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: usize,
    pub batch_size: usize,
    pub target_sync_period: usize,
    pub buffer_capacity: usize,
    pub train_steps: usize,
    /// Random-action steps that seed the buffer before training starts.
    pub warmup_steps: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub optimizer: OptimizerKind,
    /// Positive factor applied to rewards before they enter the TD targets.
    /// The greedy policy is invariant to it.
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for DqnHyper {
    fn default() -> Self {
        let train_steps = 20_000;
        Self {
            gamma: 0.9,
            lr: 1e-3,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: train_steps / 2,
            batch_size: 64,
            target_sync_period: 500,
            buffer_capacity: 50_000,
            train_steps,
            warmup_steps: 1_000,
            hidden1: 128,
            hidden2: 128,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 1.0,
            seed: 0,
        }
    }
}

impl DqnHyper {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return fail("need 0 <= eps_end <= eps_start <= 1");
        }
        if !(self.lr > 0.0) {
            return fail("lr must be positive");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return fail("need 1 <= batch_size <= buffer_capacity");
        }
        if self.target_sync_period == 0 {
            return fail("target_sync_period must be positive");
        }
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return fail("hidden widths must be positive");
        }
        if !(self.reward_scale > 0.0) {
            return fail("reward_scale must be positive");
        }
        Ok(())
    }
}

/// Linear decay from `start` to `end` over `decay_steps`, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: usize,
}

impl EpsilonSchedule {
    pub fn value(&self, step: usize) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// `r + gamma * max_a' Q_target(s', a')` for every transition. The task is
/// continuing, so no transition is treated as terminal.
pub fn td_targets(batch: &Batch, target: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    td_targets_scaled(batch, target, gamma, 1.0)
}

fn td_targets_scaled(batch: &Batch, target: &QNetwork, gamma: f64, reward_scale: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Structural("empty batch".into()));
    }
    let next_max = target.max_q_batch(batch.next_states.view())?;
    let targets: Vec<f64> = batch
        .rewards
        .iter()
        .zip(next_max)
        .map(|(&r, q)| reward_scale * r + gamma * q)
        .collect();
    if let Some(bad) = targets.iter().find(|y| !y.is_finite()) {
        return Err(Error::Numerical(format!("non-finite TD target {bad}")));
    }
    Ok(targets)
}

fn loss_gradient_step(
    net: &mut QNetwork,
    opt: &mut Optimizer,
    batch: &Batch,
    targets: &[f64],
    lr: f64,
) -> Result<f64> {
    let (loss, grad) = net.loss_and_gradient(batch.states.view(), &batch.actions, targets)?;
    opt.apply(net, &grad, lr);
    Ok(loss)
}

/// One gradient-descent step on the mean squared TD error. Returns the loss
/// measured before the update.
pub fn train_step(net: &mut QNetwork, batch: &Batch, targets: &[f64], lr: f64) -> Result<f64> {
    loss_gradient_step(net, &mut Optimizer::Sgd, batch, targets, lr)
}

/// Epsilon-greedy choice over `q`; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], eps: f64, rng: &mut R) -> usize {
    select_action_lazy(q.len(), || Ok(q.to_vec()), eps, rng).expect("infallible")
}

/// Like [`select_action`], but only evaluates the Q-values when acting
/// greedily. Consumes randomness identically.
pub fn select_action_lazy<R, F>(num_actions: usize, q: F, eps: f64, rng: &mut R) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnOnce() -> Result<Vec<f64>>,
{
    assert!(num_actions > 0, "empty action set");
    let u: f64 = rng.random();
    if u < eps {
        Ok(rng.random_range(0..num_actions))
    } else {
        let q = q()?;
        Ok(argmax(ndarray::ArrayView1::from(&q[..])))
    }
}

/// Fresh deep copy of the online weights.
pub fn sync_target(net: &QNetwork) -> QNetwork {
    net.clone()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub reward: f64,
    pub loss: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub mean_reward: f64,
    /// Discounted return accumulated from the first step of the episode.
    pub discounted_return: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeSummary>,
    pub syncs: usize,
}

impl TrainLog {
    /// Mean reward over the last `n` training steps.
    pub fn tail_mean_reward(&self, n: usize) -> f64 {
        let tail = &self.steps[self.steps.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|s| s.reward).sum::<f64>() / tail.len() as f64
    }
}

/// Trains a Q-network on `env`: a random warm-up fills the replay buffer,
/// then each step acts epsilon-greedily, stores the transition, fits one
/// sampled minibatch and syncs the target copy every `target_sync_period`
/// updates.
pub fn train(env: &mut Environment, hyper: &DqnHyper) -> Result<(QNetwork, TrainLog)> {
    hyper.validate()?;
    let n_actions = env.num_actions();
    let obs_len = env.observation_len();
    let mut init_rng = stream_rng(hyper.seed, INIT_STREAM);
    let mut rng = stream_rng(hyper.seed, AGENT_STREAM);
    let mut online = QNetwork::new(&[obs_len, hyper.hidden1, hyper.hidden2, n_actions], &mut init_rng)?;
    let mut target = sync_target(&online);
    let mut opt = Optimizer::new(hyper.optimizer, &online);
    let mut buffer = ReplayBuffer::new(hyper.buffer_capacity, obs_len);
    let schedule = EpsilonSchedule {
        start: hyper.eps_start,
        end: hyper.eps_end,
        decay_steps: hyper.eps_decay_steps,
    };

    let mut obs = env.observe();
    for _ in 0..hyper.warmup_steps {
        let a = rng.random_range(0..n_actions);
        let out = env.apply_index(a)?;
        let next = env.observe();
        buffer.push(&obs, a, out.reward, &next)?;
        obs = next;
    }

    let mut log = TrainLog {
        steps: Vec::with_capacity(hyper.train_steps),
        ..Default::default()
    };
    let mut ep_sum = 0.0;
    let mut ep_ret = 0.0;
    let mut ep_len = 0usize;
    let mut discount = 1.0;
    for step in 0..hyper.train_steps {
        let eps = schedule.value(step);
        let a = select_action_lazy(n_actions, || online.forward(&obs), eps, &mut rng)?;
        let out = env.apply_index(a)?;
        let next = env.observe();
        buffer.push(&obs, a, out.reward, &next)?;
        obs = next;

        let batch = buffer.sample(hyper.batch_size, &mut rng);
        let targets = td_targets_scaled(&batch, &target, hyper.gamma, hyper.reward_scale)?;
        let loss = loss_gradient_step(&mut online, &mut opt, &batch, &targets, hyper.lr)?;
        if (step + 1) % hyper.target_sync_period == 0 {
            target = sync_target(&online);
            log.syncs += 1;
        }

        log.steps.push(StepRecord {
            reward: out.reward,
            loss,
            epsilon: eps,
        });
        ep_sum += out.reward;
        ep_ret += discount * out.reward;
        discount *= hyper.gamma;
        ep_len += 1;
        if ep_len == env.config().episode_len {
            log.episodes.push(EpisodeSummary {
                mean_reward: ep_sum / ep_len as f64,
                discounted_return: ep_ret,
            });
            ep_sum = 0.0;
            ep_ret = 0.0;
            ep_len = 0;
            discount = 1.0;
        }
    }
    Ok((online, log))
}

/// Greedy action of a trained network for an observation.
pub fn greedy_action(net: &QNetwork, obs: &[f64]) -> Result<usize> {
    let q = net.forward(obs)?;
    Ok(argmax(ndarray::ArrayView1::from(&q[..])))
}
