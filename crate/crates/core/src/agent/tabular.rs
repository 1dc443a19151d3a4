//! Tabular Q-learning on small finite problems. Used as a reference for the
//! update rule the DQN approximates.

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn max_value(&self, s: usize) -> f64 {
        let row = &self.values[s * self.n_actions..(s + 1) * self.n_actions];
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`.
pub fn tabular_q_update(table: &mut QTable, s: usize, a: usize, r: f64, s_next: usize, alpha: f64, gamma: f64) {
    let old = table.get(s, a);
    let td = r + gamma * table.max_value(s_next) - old;
    table.set(s, a, old + alpha * td);
}

/// Finite MDP with an explicit kernel `P[s][a][s']` and rewards `R[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

impl FiniteMdp {
    pub fn new(kernel: Vec<Vec<Vec<f64>>>, rewards: Vec<Vec<f64>>) -> Result<Self> {
        let ns = kernel.len();
        if ns == 0 || rewards.len() != ns {
            return Err(Error::Structural("kernel and rewards disagree on states".into()));
        }
        let na = kernel[0].len();
        for (s, row) in kernel.iter().enumerate() {
            if row.len() != na || rewards[s].len() != na {
                return Err(Error::Structural(format!("state {s} has a ragged action set")));
            }
            for dist in row {
                let total: f64 = dist.iter().sum();
                if dist.len() != ns || (total - 1.0).abs() > 1e-12 || dist.iter().any(|&p| p < 0.0) {
                    return Err(Error::Structural(format!("state {s}: invalid transition row")));
                }
            }
        }
        Ok(Self { kernel, rewards })
    }

    pub fn n_states(&self) -> usize {
        self.kernel.len()
    }

    pub fn n_actions(&self) -> usize {
        self.kernel[0].len()
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (next, &p) in self.kernel[s][a].iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        self.n_states() - 1
    }
}

/// Q-learning from a generative model: every update draws `(s, a)`
/// uniformly, samples `s'` and applies [`tabular_q_update`] with step size
/// `n(s,a)^-decay`.
pub fn q_learning<R: Rng + ?Sized>(mdp: &FiniteMdp, gamma: f64, updates: usize, decay: f64, rng: &mut R) -> QTable {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut table = QTable::new(ns, na);
    let mut visits = vec![0u64; ns * na];
    for _ in 0..updates {
        let s = rng.random_range(0..ns);
        let a = rng.random_range(0..na);
        let next = mdp.sample_next(s, a, rng);
        let n = &mut visits[s * na + a];
        *n += 1;
        let alpha = (*n as f64).powf(-decay);
        tabular_q_update(&mut table, s, a, mdp.rewards[s][a], next, alpha, gamma);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded() -> QTable {
        let mut t = QTable::new(2, 2);
        t.set(0, 0, 1.0);
        t.set(0, 1, 2.0);
        t.set(1, 0, -1.0);
        t.set(1, 1, 4.0);
        t
    }

    #[test]
    fn zero_step_keeps_table() {
        let mut t = seeded();
        tabular_q_update(&mut t, 0, 1, 10.0, 1, 0.0, 0.9);
        assert_eq!(t, seeded());
    }

    #[test]
    fn full_step_without_discount_overwrites() {
        let mut t = seeded();
        tabular_q_update(&mut t, 1, 0, 7.5, 0, 1.0, 0.0);
        assert_eq!(t.get(1, 0), 7.5);
    }

    #[test]
    fn only_the_visited_entry_moves() {
        let mut t = seeded();
        tabular_q_update(&mut t, 0, 0, 0.5, 1, 0.25, 0.9);
        // 1 + 0.25 * (0.5 + 0.9 * 4 - 1)
        assert!((t.get(0, 0) - 1.775).abs() < 1e-15);
        assert_eq!(t.get(0, 1), 2.0);
        assert_eq!(t.get(1, 0), -1.0);
        assert_eq!(t.get(1, 1), 4.0);
    }

    #[test]
    fn rejects_bad_kernel() {
        let bad = FiniteMdp::new(vec![vec![vec![0.5, 0.4]]], vec![vec![1.0]]);
        assert!(bad.is_err());
    }
}
