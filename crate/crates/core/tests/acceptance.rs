//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test -p backhaul-core --test acceptance -- 1 2 8`.

use std::path::PathBuf;
use std::time::Instant;

use backhaul_core::baselines::brute_force_alloc;
use backhaul_core::env::instant_utility;
use backhaul_core::harness::eval::{eval_env, run_eval, train_scheme};
use backhaul_core::harness::stats::paired_lower_bound;
use backhaul_core::harness::{MetricsRow, Policy, ScenarioConfig, Scheme};
use backhaul_core::verify;

struct Outcome {
    passed: bool,
    detail: String,
}

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn from_check(r: verify::CheckReport) -> Outcome {
    Outcome {
        passed: r.passed,
        detail: format!("{:.3e} < {:.0e} required; {}", r.value, r.threshold, r.detail),
    }
}

fn gradient() -> Outcome {
    from_check(verify::gradient_check(100, 1e-5, 2024).expect("gradient check runs"))
}

fn tabular() -> Outcome {
    from_check(verify::tabular_check(2024))
}

fn myopic() -> Outcome {
    from_check(verify::myopic_check(1_000, 2024).expect("myopic check runs"))
}

fn stationarity() -> Outcome {
    from_check(verify::stationarity_check(&[30.0, 60.0, 90.0], 1_000_000, 2024).expect("chain runs"))
}

fn structural() -> Outcome {
    from_check(verify::structural_check(100_000, 2024).expect("fuzz runs"))
}

/// Greedy reward of a trained network over the brute-force optimum, per seed,
/// on frozen links.
fn static_dqn() -> Outcome {
    let cfg = config("static_cell.cfg");
    let mut ratios = Vec::new();
    for seed in 0..cfg.num_seeds as u64 {
        let (net, _) = train_scheme(&cfg, cfg.scheme, seed).expect("training runs");
        let env_cfg = cfg.env_for(cfg.scheme);
        let mut env = eval_env(&cfg, cfg.scheme, seed).expect("valid cell");
        let (mut got, mut best) = (0.0, 0.0);
        for _ in 0..cfg.eval_steps {
            let state = env.state().clone();
            let opt = brute_force_alloc(&state, &env_cfg, env.actions()).expect("non-empty actions");
            best += instant_utility(&state, &opt.n, &env_cfg);
            got += Policy::Dqn(net.clone()).act(&mut env).expect("valid step").reward;
        }
        ratios.push(got / best);
    }
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        passed: worst >= 0.95,
        detail: format!(
            "worst greedy/optimal reward {worst:.4} over {} cells (>= 0.95 required); ratios {}",
            ratios.len(),
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ")
        ),
    }
}

/// Rows of every scheme for every seed of `cfg`, sharing trajectories.
fn run_all_schemes(cfg: &ScenarioConfig, schemes: &[Scheme], label: &str) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    for i in 0..cfg.num_seeds as u64 {
        let seed = cfg.hyper.seed + i;
        let t = Instant::now();
        for &scheme in schemes {
            let policy = match scheme {
                Scheme::Drl1 | Scheme::Drl2 => Policy::Dqn(train_scheme(cfg, scheme, seed).expect("training runs").0),
                Scheme::Myopic => Policy::Myopic,
                Scheme::Equal => Policy::Equal,
            };
            rows.push(run_eval(&policy, scheme, cfg, seed).expect("evaluation runs"));
        }
        let line: Vec<String> = rows[rows.len() - schemes.len()..]
            .iter()
            .map(|r| format!("{} {:.1}", r.scheme, r.sum_rate_mbps))
            .collect();
        eprintln!("  [{label}] seed {seed}: {} ({:.0} s)", line.join(", "), t.elapsed().as_secs_f64());
    }
    rows
}

fn column(rows: &[MetricsRow], scheme: Scheme, f: impl Fn(&MetricsRow) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| r.scheme == scheme).map(f).collect()
}

fn ordering(rows: &[MetricsRow]) -> Outcome {
    let rate = |s| column(rows, s, |r| r.sum_rate_mbps);
    let (d1, d2, my, eq) = (rate(Scheme::Drl1), rate(Scheme::Drl2), rate(Scheme::Myopic), rate(Scheme::Equal));
    let diffs: Vec<f64> = d2.iter().zip(&my).map(|(a, b)| a - b).collect();
    let lower = paired_lower_bound(&diffs, 0.95).expect("at least two seeds");
    let (m1, m2, mm, me) = (mean(&d1), mean(&d2), mean(&my), mean(&eq));
    let checks = [
        (m2 > m1, format!("DRL2 {m2:.1} > DRL1 {m1:.1}")),
        (m1 >= 1.1 * me, format!("DRL1 {m1:.1} >= 1.1 x EQUAL {me:.1}")),
        (m2 >= 1.1 * me, format!("DRL2 {m2:.1} >= 1.1 x EQUAL {me:.1}")),
        (lower >= 0.0, format!("95% lower bound of DRL2 - MYOPIC {lower:.1} >= 0 (MYOPIC {mm:.1})")),
    ];
    Outcome {
        passed: checks.iter().all(|c| c.0),
        detail: checks
            .iter()
            .map(|(ok, s)| format!("{}{s}", if *ok { "" } else { "not " }))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn fairness(rows: &[MetricsRow]) -> Outcome {
    let jain = |s| column(rows, s, |r| r.jain.unwrap_or(0.0));
    let (j1, j2) = (mean(&jain(Scheme::Drl1)), mean(&jain(Scheme::Drl2)));
    Outcome {
        passed: j1 >= j2,
        detail: format!("mean Jain DRL1 {j1:.4} vs DRL2 {j2:.4} (DRL1 >= DRL2 required)"),
    }
}

fn blockage_gap() -> Outcome {
    let base = config("blockage_sweep.cfg");
    let mut gaps = Vec::new();
    for (label, a_out) in [("low", 1.0 / 200.0), ("high", 1.0 / 30.0)] {
        let mut cfg = base.clone();
        cfg.channel.a_out = a_out;
        let rows = run_all_schemes(&cfg, &[Scheme::Drl2, Scheme::Myopic], label);
        let d2 = mean(&column(&rows, Scheme::Drl2, |r| r.sum_rate_mbps));
        let my = mean(&column(&rows, Scheme::Myopic, |r| r.sum_rate_mbps));
        gaps.push((label, a_out, d2, my, (d2 - my) / my));
    }
    let (low, high) = (gaps[0].4, gaps[1].4);
    Outcome {
        passed: high > low,
        detail: format!(
            "gap (DRL2 - MYOPIC)/MYOPIC {high:.4} at a_out 1/30 vs {low:.4} at 1/200 (larger at high required); {}",
            gaps.iter()
                .map(|g| format!("{} a_out {:.5}: DRL2 {:.1}, MYOPIC {:.1}", g.0, g.1, g.2, g.3))
                .collect::<Vec<_>>()
                .join("; ")
        ),
    }
}

fn report(id: u32, name: &str, limit: Option<u64>, start: Instant, outcome: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| secs < l as f64);
    let passed = outcome.passed && in_time;
    let budget = match limit {
        Some(l) => format!("{secs:.1} s of {l} s"),
        None => format!("{secs:.1} s"),
    };
    println!(
        "criterion {id} {name}: {} | {} | {budget}{}",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        if in_time { "" } else { " (over time)" }
    );
    passed
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |id: u32| wanted.is_empty() || wanted.contains(&id);
    let mut all = true;
    let minutes = |m: u64| Some(m * 60);

    type Check = (u32, &'static str, Option<u64>, fn() -> Outcome);
    let quick: [Check; 5] = [
        (1, "gradient oracle", Some(30), gradient),
        (2, "tabular Q-learning oracle", Some(10), tabular),
        (3, "myopic exactness", Some(60), myopic),
        (8, "channel stationarity", Some(30), stationarity),
        (9, "structural invariants", Some(60), structural),
    ];
    for (id, name, limit, f) in quick {
        if run(id) {
            let t = Instant::now();
            all &= report(id, name, limit, t, f());
        }
    }
    if run(4) {
        let t = Instant::now();
        all &= report(4, "DQN on a static cell", minutes(5), t, static_dqn());
    }
    if run(5) || run(7) {
        let t = Instant::now();
        let cfg = config("user_sweep.cfg");
        let rows = run_all_schemes(&cfg, &Scheme::ALL, "K=6");
        if run(5) {
            all &= report(5, "sum-rate ordering at K=6", minutes(30), t, ordering(&rows));
        }
        if run(7) {
            all &= report(7, "fairness ordering at K=6", None, t, fairness(&rows));
        }
    }
    if run(6) {
        let t = Instant::now();
        all &= report(6, "blockage gap at K=5", minutes(30), t, blockage_gap());
    }
    if !all {
        std::process::exit(1);
    }
}
