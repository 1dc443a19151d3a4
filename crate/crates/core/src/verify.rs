//! Numerical oracles shared by the test suites and the `selftest` command.
//!
//! Each check is deterministic given its seed and returns a report with the
//! measured quantity and the threshold it is held to.

use ndarray::Array2;
use rand::Rng;

use crate::agent::network::{Dense, QNetwork};
use crate::agent::tabular::{q_learning, FiniteMdp, QTable};
use crate::baselines::{brute_force_alloc, myopic_alloc};
use crate::channel::{steady_probs, ChannelParams, LinkState, UserChannel};
use crate::env::{enumerate_actions, instant_utility, EnvConfig, Environment, SystemState, Utility};
use crate::{stream_rng, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (threshold {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            self.detail
        )
    }
}

fn report(name: &'static str, value: f64, threshold: f64, detail: String) -> CheckReport {
    CheckReport {
        name,
        value,
        threshold,
        passed: value < threshold,
        detail,
    }
}

/// Pre-activations of every hidden unit for every row of `x`.
fn hidden_preactivations(net: &QNetwork, x: &Array2<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = x.clone();
    for layer in &net.layers()[..net.layers().len() - 1] {
        let z = h.dot(&layer.weights.t()) + &layer.bias;
        out.extend(z.iter().copied());
        h = z.mapv(|v| v.max(0.0));
    }
    out
}

/// Backpropagated gradients against central differences with step `h` on
/// `nets` random small networks and batches. Draws whose hidden
/// pre-activations lie within `100 h` of a ReLU kink are redrawn, since the
/// loss is not differentiable there. The relative error of one entry is
/// `|g - f| / max(|g|, |f|, 1e-8)`.
pub fn gradient_check(nets: usize, h: f64, seed: u64) -> Result<CheckReport> {
    let mut rng = stream_rng(seed, 0);
    let mut worst: f64 = 0.0;
    let mut entries = 0usize;
    let mut redraws = 0usize;
    let mut done = 0;
    while done < nets {
        let depth = rng.random_range(1..=3usize);
        let mut sizes = vec![rng.random_range(2..=6usize)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..=6usize));
        }
        sizes.push(rng.random_range(2..=7usize));
        let layers: Vec<Dense> = sizes
            .windows(2)
            .map(|w| {
                let mut d = Dense::fan_in_uniform(w[0], w[1], &mut rng);
                d.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
                d
            })
            .collect();
        let mut net = QNetwork::from_layers(layers)?;
        let batch = rng.random_range(1..=5usize);
        let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
        let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..net.num_actions())).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
        if hidden_preactivations(&net, &x).iter().any(|z| z.abs() < 100.0 * h) {
            redraws += 1;
            continue;
        }
        let (_, grad) = net.loss_and_gradient(x.view(), &actions, &targets)?;
        for l in 0..net.layers().len() {
            let (rows, cols) = net.layers()[l].weights.dim();
            for r in 0..rows {
                for c in (0..cols).map(Some).chain([None]) {
                    let analytic = grad.entry(l, r, c);
                    let orig = param(&net, l, r, c);
                    set_param(&mut net, l, r, c, orig + h);
                    let up = net.loss(x.view(), &actions, &targets)?;
                    set_param(&mut net, l, r, c, orig - h);
                    let down = net.loss(x.view(), &actions, &targets)?;
                    set_param(&mut net, l, r, c, orig);
                    let numeric = (up - down) / (2.0 * h);
                    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                    worst = worst.max((analytic - numeric).abs() / denom);
                    entries += 1;
                }
            }
        }
        done += 1;
    }
    Ok(report(
        "gradient",
        worst,
        1e-4,
        format!("max relative error over {entries} entries of {nets} networks ({redraws} redraws)"),
    ))
}

fn param(net: &QNetwork, l: usize, r: usize, c: Option<usize>) -> f64 {
    let layer = &net.layers()[l];
    match c {
        Some(c) => layer.weights[[r, c]],
        None => layer.bias[r],
    }
}

fn set_param(net: &mut QNetwork, l: usize, r: usize, c: Option<usize>, v: f64) {
    let layer = &mut net.layers_mut()[l];
    match c {
        Some(c) => layer.weights[[r, c]] = v,
        None => layer.bias[r] = v,
    }
}

/// Fixed point of the Bellman optimality operator, iterated until the
/// sup-norm change drops below `tol`.
pub fn value_iteration(mdp: &FiniteMdp, gamma: f64, tol: f64) -> QTable {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = QTable::new(ns, na);
    loop {
        let mut next = QTable::new(ns, na);
        for s in 0..ns {
            for a in 0..na {
                let future: f64 = (0..ns).map(|t| mdp.kernel[s][a][t] * q.max_value(t)).sum();
                next.set(s, a, mdp.rewards[s][a] + gamma * future);
            }
        }
        let change = next.sup_distance(&q);
        q = next;
        if change < tol {
            return q;
        }
    }
}

/// Two states, two actions: action 0 tends to stay, action 1 tends to switch.
pub fn two_state_mdp() -> FiniteMdp {
    FiniteMdp::new(
        vec![
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            vec![vec![0.4, 0.6], vec![0.9, 0.1]],
        ],
        vec![vec![1.0, 0.0], vec![2.0, 0.5]],
    )
    .expect("valid fixture")
}

pub const TABULAR_GAMMA: f64 = 0.5;
pub const TABULAR_UPDATES: usize = 20_000_000;
pub const TABULAR_DECAY: f64 = 0.9;

/// Tabular Q-learning on [`two_state_mdp`] against value iteration.
pub fn tabular_check(seed: u64) -> CheckReport {
    let mdp = two_state_mdp();
    let exact = value_iteration(&mdp, TABULAR_GAMMA, 1e-13);
    let mut rng = stream_rng(seed, 0);
    let learned = q_learning(&mdp, TABULAR_GAMMA, TABULAR_UPDATES, TABULAR_DECAY, &mut rng);
    let dist = learned.sup_distance(&exact);
    report(
        "tabular",
        dist,
        1e-3,
        format!("sup-norm distance after {TABULAR_UPDATES} updates"),
    )
}

/// Greedy myopic allocation against exhaustive search on random instances
/// with `K <= 3`, `M <= 6` and both utilities.
pub fn myopic_check(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = stream_rng(seed, 0);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let k = rng.random_range(1..=3usize);
        let m = rng.random_range(k as u32 + 1..=6);
        let cfg = EnvConfig {
            num_users: k,
            num_blocks: m,
            utility: if i % 2 == 0 { Utility::Log } else { Utility::Sqrt },
            ..Default::default()
        };
        let rates: Vec<f64> = (0..k)
            .map(|_| match rng.random_range(0..5) {
                0 => 0.0,
                1 => cfg.block_capacity_bps * rng.random_range(1..=6) as f64,
                _ => rng.random_range(0.0..8e9),
            })
            .collect();
        let links = rates
            .iter()
            .map(|&r| if r == 0.0 { LinkState::Outage } else { LinkState::Nlos })
            .collect();
        let state = SystemState::new(links, rates, cfg.block_capacity_bps)?;
        let actions = enumerate_actions(k, m, cfg.action_cap)?;
        let greedy = instant_utility(&state, &myopic_alloc(&state, &cfg).n, &cfg);
        let best = instant_utility(&state, &brute_force_alloc(&state, &cfg, &actions)?.n, &cfg);
        worst = worst.max((best - greedy) / best.abs().max(1.0));
    }
    Ok(report(
        "myopic",
        worst,
        1e-9,
        format!("worst relative utility shortfall over {instances} instances"),
    ))
}

/// Empirical link-state frequencies of the blockage chain at each distance
/// against the stationary probabilities; reports the worst L1 distance.
pub fn stationarity_check(distances: &[f64], steps: usize, seed: u64) -> Result<CheckReport> {
    let p = ChannelParams::default();
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (i, &d) in distances.iter().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        let mut ch = UserChannel::new(d, LinkState::Los)?;
        let mut counts = [0usize; 3];
        for _ in 0..steps {
            ch.advance(&p, &mut rng);
            counts[ch.state.index()] += 1;
        }
        let (los, nlos, out) = steady_probs(d, &p);
        let l1 = [los, nlos, out]
            .iter()
            .zip(counts)
            .map(|(q, c)| (c as f64 / steps as f64 - q).abs())
            .sum::<f64>();
        detail.push_str(&format!("d={d}: {l1:.4}; "));
        worst = worst.max(l1);
    }
    Ok(report("stationarity", worst, 0.01, detail.trim_end_matches("; ").to_string()))
}

/// Random steps on random cells, checking after every step that all blocks
/// are allocated, delivered rates are `min(U n_k, C_k)`, demands are
/// `ceil(C_k / U)` and the reward is finite. Reports the number of violations.
pub fn structural_check(steps: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = stream_rng(seed, 0);
    let mut violations = 0usize;
    let mut first = String::new();
    let mut done = 0;
    let mut cell = 0u64;
    while done < steps {
        let k = rng.random_range(1..=4usize);
        let m = rng.random_range(k as u32 + 1..=10);
        let cfg = EnvConfig {
            num_users: k,
            num_blocks: m,
            block_capacity_bps: rng.random_range(1e8..1e9),
            utility: if rng.random::<bool>() { Utility::Log } else { Utility::Sqrt },
            cell_radius_m: rng.random_range(20.0..300.0),
            ..Default::default()
        };
        let params = ChannelParams {
            a_out: rng.random_range(1.0 / 300.0..1.0 / 20.0),
            b_out: rng.random_range(0.0..6.0),
            dwell_lambda: rng.random_range(0.0..=1.0),
            freeze_shadowing: rng.random(),
            ..Default::default()
        };
        let mut env = Environment::new(cfg.clone(), params, cell, cell + 1)?;
        cell += 2;
        let u = cfg.block_capacity_bps;
        for _ in 0..1_000.min(steps - done) {
            let before = env.state().clone();
            let idx = rng.random_range(0..env.num_actions());
            let n = env.actions()[idx].n.clone();
            let out = env.apply_index(idx)?;
            let mut bad = Vec::new();
            if n.iter().sum::<u32>() != m {
                bad.push("block total");
            }
            for i in 0..k {
                let expected = (u * n[i] as f64).min(before.true_rates()[i]);
                if out.actual_rates[i] != expected {
                    bad.push("delivered rate");
                }
                let c = out.next_state.true_rates()[i];
                if out.next_state.demand_blocks[i] != (c / u).ceil() as u32 {
                    bad.push("demand");
                }
            }
            if !out.reward.is_finite() {
                bad.push("reward");
            }
            if !bad.is_empty() {
                violations += 1;
                if first.is_empty() {
                    first = format!("first violation ({}) at step {done}", bad.join(", "));
                }
            }
            done += 1;
        }
    }
    let detail = if first.is_empty() {
        format!("{steps} steps over {} cells", cell / 2)
    } else {
        first
    };
    Ok(report("structural", violations as f64, 1.0, detail))
}

/// Fast versions of every oracle, as run by `selftest`.
pub fn run_all() -> Result<Vec<CheckReport>> {
    Ok(vec![
        gradient_check(100, 1e-5, 1)?,
        tabular_check(2),
        myopic_check(1_000, 3)?,
        stationarity_check(&[30.0, 60.0, 90.0], 1_000_000, 4)?,
        structural_check(100_000, 5)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_iteration_matches_closed_form() {
        // Single state, single action: Q = r / (1 - gamma).
        let mdp = FiniteMdp::new(vec![vec![vec![1.0]]], vec![vec![3.0]]).unwrap();
        let q = value_iteration(&mdp, 0.75, 1e-14);
        assert!((q.get(0, 0) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn two_state_fixture_has_known_fixed_point() {
        // Solved by hand: at gamma = 0.5 the greedy policy takes action 0 in
        // both states, so V solves V0 = 1 + 0.5 (0.8 V0 + 0.2 V1) and
        // V1 = 2 + 0.5 (0.4 V0 + 0.6 V1).
        let q = value_iteration(&two_state_mdp(), 0.5, 1e-14);
        // Linear system: 0.6 V0 - 0.1 V1 = 1, -0.2 V0 + 0.7 V1 = 2.
        let det = 0.6 * 0.7 - 0.1 * 0.2;
        let v0 = (1.0 * 0.7 + 0.1 * 2.0) / det;
        let v1 = (0.6 * 2.0 + 0.2 * 1.0) / det;
        assert!((q.max_value(0) - v0).abs() < 1e-12);
        assert!((q.max_value(1) - v1).abs() < 1e-12);
        assert!(q.get(0, 0) > q.get(0, 1) && q.get(1, 0) > q.get(1, 1));
    }

    #[test]
    fn quick_oracles_pass() {
        assert!(gradient_check(5, 1e-5, 9).unwrap().passed);
        assert!(myopic_check(50, 9).unwrap().passed);
        assert!(structural_check(2_000, 9).unwrap().passed);
    }
}
