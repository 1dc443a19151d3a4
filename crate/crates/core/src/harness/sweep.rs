//! User-count and blockage sweeps over all schemes and seeds.

use super::config::{ScenarioConfig, Scheme};
use super::eval::run_scheme;
use super::metrics::{sort_rows, MetricsRow};
use crate::env::composition_count;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Users,
    AOut,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "users" => Ok(SweepParam::Users),
            "aout" => Ok(SweepParam::AOut),
            other => Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

#[derive(Debug, Default)]
pub struct SweepReport {
    pub rows: Vec<MetricsRow>,
    /// Sweep points that could not be run, with the reason.
    pub errors: Vec<(f64, Error)>,
}

/// Scenario at one sweep point.
pub fn point_config(base: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    match param {
        SweepParam::Users => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("user count must be a positive integer, got {value}")));
            }
            cfg.env.num_users = value as usize;
        }
        SweepParam::AOut => cfg.channel.a_out = value,
    }
    cfg.validate()?;
    let count = composition_count(cfg.env.num_users, cfg.env.num_blocks);
    if count > cfg.env.action_cap as u128 {
        return Err(Error::Sizing {
            count,
            cap: cfg.env.action_cap,
        });
    }
    Ok(cfg)
}

/// Runs every scheme for every seed `hyper.seed .. hyper.seed + num_seeds`
/// of one scenario.
pub fn run_point(cfg: &ScenarioConfig, schemes: &[Scheme], progress: bool) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::with_capacity(schemes.len() * cfg.num_seeds);
    for i in 0..cfg.num_seeds as u64 {
        let seed = cfg.hyper.seed + i;
        for &scheme in schemes {
            let row = run_scheme(cfg, scheme, seed)?;
            if progress {
                eprintln!(
                    "  k={} a_out={:.5} seed={} {:<6} sum_rate={:.1} Mbit/s jain={}",
                    row.k,
                    row.a_out,
                    seed,
                    scheme.name(),
                    row.sum_rate_mbps,
                    row.jain.map(|j| format!("{j:.4}")).unwrap_or_else(|| "-".into()),
                );
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Sweeps `param` over `values`. A point that fails (for instance because
/// its action space is too large) is reported and skipped.
pub fn sweep(base: &ScenarioConfig, param: SweepParam, values: &[f64], schemes: &[Scheme], progress: bool) -> SweepReport {
    let mut report = SweepReport::default();
    for &v in values {
        let outcome = point_config(base, param, v).and_then(|cfg| run_point(&cfg, schemes, progress));
        match outcome {
            Ok(rows) => report.rows.extend(rows),
            Err(e) => {
                if progress {
                    eprintln!("  sweep point {v}: {e}");
                }
                report.errors.push((v, e));
            }
        }
    }
    sort_rows(&mut report.rows);
    report
}

pub fn sweep_users(base: &ScenarioConfig, ks: &[usize]) -> SweepReport {
    let values: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    sweep(base, SweepParam::Users, &values, &Scheme::ALL, false)
}

pub fn sweep_aout(base: &ScenarioConfig, a_outs: &[f64]) -> SweepReport {
    sweep(base, SweepParam::AOut, a_outs, &Scheme::ALL, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::write_csv;

    fn quick() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.env.num_blocks = 6;
        cfg.num_seeds = 2;
        cfg.eval_steps = 40;
        cfg.hyper.train_steps = 60;
        cfg.hyper.eps_decay_steps = 30;
        cfg.hyper.warmup_steps = 16;
        cfg.hyper.batch_size = 8;
        cfg.hyper.hidden1 = 8;
        cfg.hyper.hidden2 = 8;
        cfg
    }

    #[test]
    fn single_user_schemes_coincide() {
        let report = sweep_users(&quick(), &[1]);
        assert!(report.errors.is_empty());
        assert_eq!(report.rows.len(), 4 * 2);
        for seed in 0..2 {
            let rates: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.seed == seed)
                .map(|r| r.sum_rate_mbps)
                .collect();
            assert!(rates.windows(2).all(|w| w[0] == w[1]), "{rates:?}");
        }
    }

    #[test]
    fn row_count_order_and_sizing_errors() {
        let mut cfg = quick();
        cfg.env.action_cap = 60;
        // K = 4 with M = 6 has C(9, 3) = 84 allocations: above the cap.
        let report = sweep_users(&cfg, &[2, 4, 3]);
        assert_eq!(report.rows.len(), 4 * 2 * 2);
        assert_eq!(report.errors.len(), 1);
        assert!(matches!(report.errors[0], (v, Error::Sizing { count: 84, .. }) if v == 4.0));
        let keys: Vec<_> = report.rows.iter().map(|r| (r.scheme, r.k, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for r in &report.rows {
            assert!(r.sum_rate_mbps <= cfg.env.backhaul_bps() / 1e6);
        }
    }

    #[test]
    fn csv_is_byte_identical_across_runs() {
        let cfg = quick();
        let render = || {
            let mut out = Vec::new();
            write_csv(&sweep_aout(&cfg, &[1.0 / 30.0, 1.0 / 200.0]).rows, &mut out).unwrap();
            out
        };
        assert_eq!(render(), render());
    }
}
