//! The backhaul-allocation decision process seen from the base station:
//! action enumeration, demand quantisation, rewards and one-step dynamics.

use rand::Rng;

use crate::channel::{ChannelParams, LinkState, UserChannel};
use crate::{stream_rng, Error, Result, SimRng};

const PLACEMENT_STREAM: u64 = 1;
const TRAJECTORY_STREAM: u64 = 2;

/// Per-user utility of the delivered rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Utility {
    /// `ln(1 + R / r0)`.
    Log,
    /// `sqrt(R / r0)`.
    Sqrt,
}

impl Utility {
    pub fn eval(self, rate_bps: f64, r0: f64) -> f64 {
        match self {
            Utility::Log => (rate_bps / r0).ln_1p(),
            Utility::Sqrt => (rate_bps / r0).sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Utility::Log => "log",
            Utility::Sqrt => "sqrt",
        }
    }
}

impl std::str::FromStr for Utility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(Utility::Log),
            "sqrt" => Ok(Utility::Sqrt),
            other => Err(Error::Config(format!("unknown utility `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub num_users: usize,
    pub num_blocks: u32,
    /// Capacity of one backhaul block, bit/s.
    pub block_capacity_bps: f64,
    pub utility: Utility,
    /// Rate normaliser inside the utility, bit/s.
    pub rate_scale_bps: f64,
    pub episode_len: usize,
    pub cell_radius_m: f64,
    /// Largest action space the environment agrees to enumerate.
    pub action_cap: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_users: 4,
            num_blocks: 20,
            block_capacity_bps: 500e6,
            utility: Utility::Log,
            rate_scale_bps: 1e6,
            episode_len: 200,
            cell_radius_m: 100.0,
            action_cap: 20_000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users < 1 {
            return Err(Error::Config("num_users must be at least 1".into()));
        }
        if self.num_blocks as usize <= self.num_users {
            return Err(Error::Config(format!(
                "num_blocks ({}) must exceed num_users ({})",
                self.num_blocks, self.num_users
            )));
        }
        if !(self.block_capacity_bps > 0.0) {
            return Err(Error::Config("block_capacity_bps must be positive".into()));
        }
        if !(self.rate_scale_bps > 0.0) {
            return Err(Error::Config("rate_scale_bps must be positive".into()));
        }
        if self.episode_len < 1 {
            return Err(Error::Config("episode_len must be at least 1".into()));
        }
        if !(self.cell_radius_m > 0.0) {
            return Err(Error::Config("cell_radius_m must be positive".into()));
        }
        Ok(())
    }

    /// Total backhaul capacity `U * M`, bit/s.
    pub fn backhaul_bps(&self) -> f64 {
        self.block_capacity_bps * self.num_blocks as f64
    }
}

/// A split of the `M` blocks among the `K` users.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AllocationAction {
    pub n: Vec<u32>,
    /// Position in the lexicographic enumeration.
    pub index: usize,
}

impl AllocationAction {
    /// Builds an action from a block vector, computing its index.
    pub fn from_blocks(n: Vec<u32>) -> Self {
        let index = composition_index(&n);
        Self { n, index }
    }

    pub fn total(&self) -> u32 {
        self.n.iter().sum()
    }
}

/// Number of ways to write `m` as an ordered sum of `k` nonnegative parts,
/// i.e. `C(m + k - 1, k - 1)`. Saturates at `u128::MAX`.
pub fn composition_count(k: usize, m: u32) -> u128 {
    if k == 0 {
        return u128::from(m == 0);
    }
    let n = m as u128 + k as u128 - 1;
    let r = (k as u128 - 1).min(m as u128);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic rank of a composition among all compositions with the same
/// number of parts and the same total.
pub fn composition_index(n: &[u32]) -> usize {
    let mut remaining: u32 = n.iter().sum();
    let mut rank: u128 = 0;
    for (i, &v) in n.iter().enumerate() {
        let parts_after = n.len() - i - 1;
        if parts_after == 0 {
            break;
        }
        for first in 0..v {
            rank += composition_count(parts_after, remaining - first);
        }
        remaining -= v;
    }
    rank as usize
}

/// All compositions of `m` into `k` parts in lexicographic order.
pub fn enumerate_actions(k: usize, m: u32, cap: usize) -> Result<Vec<AllocationAction>> {
    if k < 1 {
        return Err(Error::Domain("need at least one user".into()));
    }
    let count = composition_count(k, m);
    if count > cap as u128 {
        return Err(Error::Sizing { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; k];
    fill(&mut current, 0, m, &mut out);
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

fn fill(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<AllocationAction>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        let index = out.len();
        out.push(AllocationAction {
            n: current.to_vec(),
            index,
        });
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        fill(current, pos + 1, remaining - v, out);
    }
}

/// Blocks needed to carry rate `c` at `u` bit/s per block: `ceil(c / u)`.
pub fn quantize_demand(c: f64, u: f64) -> Result<u32> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("block capacity must be positive, got {u}")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("rate must be finite and nonnegative, got {c}")));
    }
    Ok((c / u).ceil() as u32)
}

/// Sum utility of the delivered rates.
pub fn compute_reward(rates: &[f64], utility: Utility, r0: f64) -> Result<f64> {
    let mut total = 0.0;
    for &r in rates {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("negative or NaN rate {r}")));
        }
        total += utility.eval(r, r0);
    }
    Ok(total)
}

/// What the base station knows at the start of a slot. The agent only ever
/// sees the link states and quantised demands; the exact rates are kept for
/// reward computation and the omniscient baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub link_states: Vec<LinkState>,
    pub demand_blocks: Vec<u32>,
    true_rates: Vec<f64>,
}

impl SystemState {
    pub fn new(link_states: Vec<LinkState>, true_rates: Vec<f64>, block_capacity: f64) -> Result<Self> {
        if link_states.len() != true_rates.len() {
            return Err(Error::Structural(format!(
                "{} link states but {} rates",
                link_states.len(),
                true_rates.len()
            )));
        }
        let demand_blocks = true_rates
            .iter()
            .map(|&c| quantize_demand(c, block_capacity))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            link_states,
            demand_blocks,
            true_rates,
        })
    }

    pub fn num_users(&self) -> usize {
        self.link_states.len()
    }

    /// Achievable rates `C_k` in effect for the current slot.
    pub fn true_rates(&self) -> &[f64] {
        &self.true_rates
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub reward: f64,
    pub actual_rates: Vec<f64>,
}

/// Delivered rates `min(U * n_k, C_k)`.
pub fn delivered_rates(state: &SystemState, n: &[u32], block_capacity: f64) -> Vec<f64> {
    n.iter()
        .zip(state.true_rates())
        .map(|(&nk, &c)| (block_capacity * nk as f64).min(c))
        .collect()
}

/// Sum utility obtained by applying `n` in `state`.
pub fn instant_utility(state: &SystemState, n: &[u32], cfg: &EnvConfig) -> f64 {
    delivered_rates(state, n, cfg.block_capacity_bps)
        .iter()
        .map(|&r| cfg.utility.eval(r, cfg.rate_scale_bps))
        .sum()
}

/// Applies `action` to `state`, then advances every link and redraws the
/// achievable rates for the next slot.
pub fn step<R: Rng + ?Sized>(
    state: &SystemState,
    action: &AllocationAction,
    channels: &mut [UserChannel],
    cfg: &EnvConfig,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<StepOutcome> {
    let k = state.num_users();
    if action.n.len() != k || channels.len() != k {
        return Err(Error::Structural(format!(
            "state has {k} users, action {} and channels {}",
            action.n.len(),
            channels.len()
        )));
    }
    if action.total() != cfg.num_blocks {
        return Err(Error::Structural(format!(
            "action allocates {} blocks, expected {}",
            action.total(),
            cfg.num_blocks
        )));
    }
    let actual_rates = delivered_rates(state, &action.n, cfg.block_capacity_bps);
    debug_assert!(actual_rates
        .iter()
        .zip(state.true_rates())
        .zip(&action.n)
        .all(|((&r, &c), &nk)| r <= c && r <= cfg.block_capacity_bps * nk as f64));
    let reward = compute_reward(&actual_rates, cfg.utility, cfg.rate_scale_bps)?;

    let mut rates = Vec::with_capacity(k);
    for ch in channels.iter_mut() {
        ch.advance(params, rng);
        rates.push(ch.rate(params, rng)?);
    }
    let link_states = channels.iter().map(|c| c.state).collect();
    let next_state = SystemState::new(link_states, rates, cfg.block_capacity_bps)?;
    Ok(StepOutcome {
        next_state,
        reward,
        actual_rates,
    })
}

/// Observation vector: per user, the one-hot link state followed by `D_k / M`.
pub fn encode_state(state: &SystemState, cfg: &EnvConfig) -> Vec<f64> {
    let m = cfg.num_blocks as f64;
    let mut x = Vec::with_capacity(4 * state.num_users());
    for (ls, &d) in state.link_states.iter().zip(&state.demand_blocks) {
        x.extend_from_slice(&ls.one_hot());
        x.push(d as f64 / m);
    }
    x
}

/// A cell instance: user placement, link chains, the current state and the
/// enumerated action space.
///
/// Placement and channel trajectory come from separate seeds so that
/// training and evaluation can share a deployment while seeing different
/// link histories, and so that every scheduler evaluated with the same
/// seeds observes the same trajectory.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    params: ChannelParams,
    channels: Vec<UserChannel>,
    state: SystemState,
    actions: Vec<AllocationAction>,
    rng: SimRng,
    t: usize,
}

impl Environment {
    pub fn new(cfg: EnvConfig, params: ChannelParams, placement_seed: u64, trajectory_seed: u64) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let mut placement = stream_rng(placement_seed, PLACEMENT_STREAM);
        let channels = (0..cfg.num_users)
            .map(|_| UserChannel::random(cfg.cell_radius_m, &params, &mut placement))
            .collect();
        Self::from_channels(cfg, params, channels, trajectory_seed)
    }

    /// Builds an environment around explicit user channels.
    pub fn from_channels(
        cfg: EnvConfig,
        params: ChannelParams,
        mut channels: Vec<UserChannel>,
        trajectory_seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if channels.len() != cfg.num_users {
            return Err(Error::Structural(format!(
                "{} channels for {} users",
                channels.len(),
                cfg.num_users
            )));
        }
        let actions = enumerate_actions(cfg.num_users, cfg.num_blocks, cfg.action_cap)?;
        let mut rng = stream_rng(trajectory_seed, TRAJECTORY_STREAM);
        let mut rates = Vec::with_capacity(channels.len());
        for ch in channels.iter_mut() {
            rates.push(ch.rate(&params, &mut rng)?);
        }
        let state = SystemState::new(
            channels.iter().map(|c| c.state).collect(),
            rates,
            cfg.block_capacity_bps,
        )?;
        Ok(Self {
            cfg,
            params,
            channels,
            state,
            actions,
            rng,
            t: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn channel_params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn channels(&self) -> &[UserChannel] {
        &self.channels
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn actions(&self) -> &[AllocationAction] {
        &self.actions
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn observation_len(&self) -> usize {
        4 * self.cfg.num_users
    }

    pub fn observe(&self) -> Vec<f64> {
        encode_state(&self.state, &self.cfg)
    }

    /// Steps taken since construction.
    pub fn time(&self) -> usize {
        self.t
    }

    /// Whether the last step closed a logging episode.
    pub fn episode_boundary(&self) -> bool {
        self.t > 0 && self.t.is_multiple_of(self.cfg.episode_len)
    }

    /// Applies the action with the given index and moves to the next slot.
    pub fn apply_index(&mut self, index: usize) -> Result<StepOutcome> {
        let action = self.actions.get(index).ok_or_else(|| {
            Error::Structural(format!(
                "action index {index} outside 0..{}",
                self.actions.len()
            ))
        })?;
        let outcome = step(
            &self.state,
            action,
            &mut self.channels,
            &self.cfg,
            &self.params,
            &mut self.rng,
        )?;
        self.state = outcome.next_state.clone();
        self.t += 1;
        Ok(outcome)
    }

    /// Applies an arbitrary valid allocation (need not be looked up by index).
    pub fn apply(&mut self, action: &AllocationAction) -> Result<StepOutcome> {
        let outcome = step(
            &self.state,
            action,
            &mut self.channels,
            &self.cfg,
            &self.params,
            &mut self.rng,
        )?;
        self.state = outcome.next_state.clone();
        self.t += 1;
        Ok(outcome)
    }
}
