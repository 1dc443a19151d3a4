//! Reference schedulers: equal split, myopic utility maximisation and an
//! exhaustive search over the enumerated allocations.

use crate::env::{instant_utility, AllocationAction, EnvConfig, SystemState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Equal,
    Myopic,
    BruteForce,
}

/// `floor(M/K)` blocks each, one extra for the first `M mod K` users.
pub fn equal_alloc(k: usize, m: u32) -> AllocationAction {
    assert!(k >= 1, "equal allocation needs at least one user");
    AllocationAction::from_blocks(equal_split(k, m))
}

fn equal_split(k: usize, m: u32) -> Vec<u32> {
    let base = m / k as u32;
    let extra = (m % k as u32) as usize;
    (0..k).map(|i| base + u32::from(i < extra)).collect()
}

/// Maximises the instantaneous sum utility by handing out blocks one at a
/// time to the user with the largest utility gain. Each user's utility is
/// concave in its block count, so the greedy result is optimal. Blocks that
/// no longer add utility are spread with the equal-split rule.
pub fn myopic_alloc(state: &SystemState, cfg: &EnvConfig) -> AllocationAction {
    let k = state.num_users();
    let u = cfg.block_capacity_bps;
    let r0 = cfg.rate_scale_bps;
    let value = |i: usize, blocks: u32| cfg.utility.eval((u * blocks as f64).min(state.true_rates()[i]), r0);

    let mut n = vec![0u32; k];
    let mut left = cfg.num_blocks;
    while left > 0 {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..k {
            if n[i] >= state.demand_blocks[i] {
                continue;
            }
            let gain = value(i, n[i] + 1) - value(i, n[i]);
            if gain > 0.0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, _)) => {
                n[i] += 1;
                left -= 1;
            }
            None => break,
        }
    }
    for (ni, extra) in n.iter_mut().zip(equal_split(k, left)) {
        *ni += extra;
    }
    AllocationAction::from_blocks(n)
}

/// Best allocation by exhaustive search; ties go to the lowest index.
pub fn brute_force_alloc(state: &SystemState, cfg: &EnvConfig, actions: &[AllocationAction]) -> Result<AllocationAction> {
    let mut best: Option<(&AllocationAction, f64)> = None;
    for a in actions {
        let v = instant_utility(state, &a.n, cfg);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a.clone())
        .ok_or_else(|| Error::Structural("empty action list".into()))
}
