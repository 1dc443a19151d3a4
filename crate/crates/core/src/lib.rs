//! Discrete-time simulator of backhaul resource-block allocation in a single
//! mmWave cell whose user links are subject to Markov blockage, together
//! with a deep Q-learning scheduler and reference schedulers.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: link-state chain, path loss and achievable rate per user.
//! * [`env`]: the allocation MDP (action enumeration, rewards, one-step dynamics).
//! * [`agent`]: Q-network, replay buffer, DQN training loop and a tabular
//!   Q-learning reference.
//! * [`baselines`]: equal, myopic and brute-force schedulers.
//! * [`harness`]: scenario configuration, seeded evaluation, sweeps and CSV.
//! * [`verify`]: independent numerical oracles shared by tests and `selftest`.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod env;
mod error;
pub mod harness;
pub mod verify;

pub use agent::{DqnHyper, QNetwork, ReplayBuffer, Transition};
pub use baselines::BaselineKind;
pub use channel::{ChannelParams, LinkState, UserChannel};
pub use env::{AllocationAction, EnvConfig, Environment, StepOutcome, SystemState, Utility};
pub use error::{Error, Result};
pub use harness::{MetricsRow, ScenarioConfig, Scheme};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random source used throughout; fixed so that runs are reproducible
/// across platforms.
pub type SimRng = ChaCha8Rng;

/// Derives an independent stream from a base seed and a stream label.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
