//! Fixtures shared by the kernel benchmarks.

use backhaul_core::channel::ChannelParams;
use backhaul_core::env::{EnvConfig, Environment};
use backhaul_core::agent::{Batch, ReplayBuffer};
use backhaul_core::{stream_rng, QNetwork, SimRng};
use rand::Rng;

/// Default cell with `k` users and `m` blocks.
pub fn env(k: usize, m: u32, action_cap: usize) -> Environment {
    let cfg = EnvConfig {
        num_users: k,
        num_blocks: m,
        action_cap,
        ..Default::default()
    };
    Environment::new(cfg, ChannelParams::default(), 1, 2).expect("valid bench cell")
}

/// Q-network sized for `env` with two hidden layers of `hidden` units.
pub fn network(env: &Environment, hidden: usize) -> QNetwork {
    let mut rng = stream_rng(3, 0);
    QNetwork::new(&[env.observation_len(), hidden, hidden, env.num_actions()], &mut rng).expect("valid sizes")
}

/// Minibatch of `n` transitions with random actions collected from `env`.
pub fn batch(env: &mut Environment, n: usize) -> Batch {
    let mut rng: SimRng = stream_rng(4, 0);
    let mut buffer = ReplayBuffer::new(n, env.observation_len());
    for _ in 0..n {
        let s = env.observe();
        let a = rng.random_range(0..env.num_actions());
        let out = env.apply_index(a).expect("valid action");
        buffer.push(&s, a, out.reward, &env.observe()).expect("matching widths");
    }
    buffer.sample(n, &mut rng)
}
