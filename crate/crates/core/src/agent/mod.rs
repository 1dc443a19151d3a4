//! Value-based learning: the Q-network, its optimisers, experience replay,
//! the DQN training loop, checkpoints and a tabular reference learner.

pub mod checkpoint;
pub mod dqn;
pub mod network;
pub mod optim;
pub mod replay;
pub mod tabular;

pub use dqn::{
    greedy_action, select_action, sync_target, td_targets, train, train_step, DqnHyper, EpsilonSchedule,
    TrainLog,
};
pub use network::{Dense, Gradient, QNetwork};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use tabular::{tabular_q_update, FiniteMdp, QTable};
