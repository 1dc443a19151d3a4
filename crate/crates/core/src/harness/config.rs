//! Flat `key = value` scenario files with dotted section prefixes:
//!
//! ```text
//! # comment
//! env.num_users = 4
//! channel.a_out = 1/30
//! dqn.optimizer = adam
//! scenario.scheme = DRL2
//! ```
//!
//! Unknown keys, duplicate keys and malformed values are errors. Numeric
//! values may be written as a fraction `a/b`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::agent::checkpoint::{config_hash, ConfigHash};
use crate::agent::{DqnHyper, OptimizerKind};
use crate::channel::ChannelParams;
use crate::env::{EnvConfig, Utility};
use crate::{Error, Result};

/// Scheduling scheme compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// DQN trained on the log utility.
    Drl1,
    /// DQN trained on the square-root utility.
    Drl2,
    Myopic,
    Equal,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Drl1, Scheme::Drl2, Scheme::Myopic, Scheme::Equal];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Drl1 => "DRL1",
            Scheme::Drl2 => "DRL2",
            Scheme::Myopic => "MYOPIC",
            Scheme::Equal => "EQUAL",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Scheme::Drl1 | Scheme::Drl2)
    }

    /// Utility the scheme is trained or evaluated with.
    pub fn utility(self, configured: Utility) -> Utility {
        match self {
            Scheme::Drl1 => Utility::Log,
            Scheme::Drl2 => Utility::Sqrt,
            Scheme::Myopic | Scheme::Equal => configured,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "DRL1" => Ok(Scheme::Drl1),
            "DRL2" => Ok(Scheme::Drl2),
            "MYOPIC" => Ok(Scheme::Myopic),
            "EQUAL" => Ok(Scheme::Equal),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub env: EnvConfig,
    pub channel: ChannelParams,
    pub hyper: DqnHyper,
    pub scheme: Scheme,
    pub num_seeds: usize,
    pub eval_steps: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            channel: ChannelParams::default(),
            hyper: DqnHyper::default(),
            scheme: Scheme::Drl1,
            num_seeds: 10,
            eval_steps: 5_000,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let bad = || Error::Config(format!("`{key}`: cannot parse `{v}` as a number"));
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => v.parse().map_err(|_| bad())?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.replace('_', "")
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}` as an integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen = std::collections::HashSet::new();
        let mut decay_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            if key == "dqn.eps_decay_steps" {
                decay_set = true;
            }
            cfg.set(key, value)?;
        }
        if !decay_set {
            cfg.hyper.eps_decay_steps = cfg.hyper.train_steps / 2;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let (e, c, h) = (&mut self.env, &mut self.channel, &mut self.hyper);
        match key {
            "env.num_users" => e.num_users = parse_int(key, v)?,
            "env.num_blocks" => e.num_blocks = parse_int(key, v)?,
            "env.block_capacity_bps" => e.block_capacity_bps = parse_f64(key, v)?,
            "env.utility" => e.utility = v.parse()?,
            "env.rate_scale_bps" => e.rate_scale_bps = parse_f64(key, v)?,
            "env.episode_len" => e.episode_len = parse_int(key, v)?,
            "env.cell_radius_m" => e.cell_radius_m = parse_f64(key, v)?,
            "env.action_cap" => e.action_cap = parse_int(key, v)?,
            "channel.a_out" => c.a_out = parse_f64(key, v)?,
            "channel.b_out" => c.b_out = parse_f64(key, v)?,
            "channel.a_los" => c.a_los = parse_f64(key, v)?,
            "channel.los_alpha_db" => c.los_alpha_db = parse_f64(key, v)?,
            "channel.los_beta" => c.los_beta = parse_f64(key, v)?,
            "channel.nlos_alpha_db" => c.nlos_alpha_db = parse_f64(key, v)?,
            "channel.nlos_beta" => c.nlos_beta = parse_f64(key, v)?,
            "channel.nlos_sigma_db" => c.nlos_sigma_db = parse_f64(key, v)?,
            "channel.bandwidth_hz" => c.bandwidth_hz = parse_f64(key, v)?,
            "channel.tx_power_dbm" => c.tx_power_dbm = parse_f64(key, v)?,
            "channel.noise_psd_dbm_hz" => c.noise_psd_dbm_hz = parse_f64(key, v)?,
            "channel.noise_figure_db" => c.noise_figure_db = parse_f64(key, v)?,
            "channel.antenna_gain_db" => c.antenna_gain_db = parse_f64(key, v)?,
            "channel.se_cap_bps_hz" => c.se_cap_bps_hz = parse_f64(key, v)?,
            "channel.dwell_lambda" => c.dwell_lambda = parse_f64(key, v)?,
            "channel.freeze_shadowing" => c.freeze_shadowing = parse_bool(key, v)?,
            "dqn.gamma" => h.gamma = parse_f64(key, v)?,
            "dqn.lr" => h.lr = parse_f64(key, v)?,
            "dqn.eps_start" => h.eps_start = parse_f64(key, v)?,
            "dqn.eps_end" => h.eps_end = parse_f64(key, v)?,
            "dqn.eps_decay_steps" => h.eps_decay_steps = parse_int(key, v)?,
            "dqn.batch_size" => h.batch_size = parse_int(key, v)?,
            "dqn.target_sync_period" => h.target_sync_period = parse_int(key, v)?,
            "dqn.buffer_capacity" => h.buffer_capacity = parse_int(key, v)?,
            "dqn.train_steps" => h.train_steps = parse_int(key, v)?,
            "dqn.warmup_steps" => h.warmup_steps = parse_int(key, v)?,
            "dqn.hidden1" => h.hidden1 = parse_int(key, v)?,
            "dqn.hidden2" => h.hidden2 = parse_int(key, v)?,
            "dqn.optimizer" => h.optimizer = v.parse::<OptimizerKind>()?,
            "dqn.reward_scale" => h.reward_scale = parse_f64(key, v)?,
            "dqn.seed" => h.seed = parse_int(key, v)?,
            "scenario.scheme" => self.scheme = v.parse()?,
            "scenario.num_seeds" => self.num_seeds = parse_int(key, v)?,
            "scenario.eval_steps" => self.eval_steps = parse_int(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.channel.validate()?;
        self.hyper.validate()?;
        if self.num_seeds < 1 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        if self.eval_steps < 1 {
            return Err(Error::Config("eval_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Environment settings with the utility the given scheme optimises.
    pub fn env_for(&self, scheme: Scheme) -> EnvConfig {
        EnvConfig {
            utility: scheme.utility(self.env.utility),
            ..self.env.clone()
        }
    }

    /// Every key in a fixed order; parses back to an identical config.
    pub fn to_config_string(&self) -> String {
        self.render(true)
    }

    /// Hash of the canonical rendering without the seed, which the command
    /// line may override per run.
    pub fn hash(&self) -> ConfigHash {
        config_hash(&self.render(false))
    }

    fn render(&self, with_seed: bool) -> String {
        let (e, c, h) = (&self.env, &self.channel, &self.hyper);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env.num_users", e.num_users.to_string());
        kv("env.num_blocks", e.num_blocks.to_string());
        kv("env.block_capacity_bps", format!("{:?}", e.block_capacity_bps));
        kv("env.utility", e.utility.name().into());
        kv("env.rate_scale_bps", format!("{:?}", e.rate_scale_bps));
        kv("env.episode_len", e.episode_len.to_string());
        kv("env.cell_radius_m", format!("{:?}", e.cell_radius_m));
        kv("env.action_cap", e.action_cap.to_string());
        kv("channel.a_out", format!("{:?}", c.a_out));
        kv("channel.b_out", format!("{:?}", c.b_out));
        kv("channel.a_los", format!("{:?}", c.a_los));
        kv("channel.los_alpha_db", format!("{:?}", c.los_alpha_db));
        kv("channel.los_beta", format!("{:?}", c.los_beta));
        kv("channel.nlos_alpha_db", format!("{:?}", c.nlos_alpha_db));
        kv("channel.nlos_beta", format!("{:?}", c.nlos_beta));
        kv("channel.nlos_sigma_db", format!("{:?}", c.nlos_sigma_db));
        kv("channel.bandwidth_hz", format!("{:?}", c.bandwidth_hz));
        kv("channel.tx_power_dbm", format!("{:?}", c.tx_power_dbm));
        kv("channel.noise_psd_dbm_hz", format!("{:?}", c.noise_psd_dbm_hz));
        kv("channel.noise_figure_db", format!("{:?}", c.noise_figure_db));
        kv("channel.antenna_gain_db", format!("{:?}", c.antenna_gain_db));
        kv("channel.se_cap_bps_hz", format!("{:?}", c.se_cap_bps_hz));
        kv("channel.dwell_lambda", format!("{:?}", c.dwell_lambda));
        kv("channel.freeze_shadowing", c.freeze_shadowing.to_string());
        kv("dqn.gamma", format!("{:?}", h.gamma));
        kv("dqn.lr", format!("{:?}", h.lr));
        kv("dqn.eps_start", format!("{:?}", h.eps_start));
        kv("dqn.eps_end", format!("{:?}", h.eps_end));
        kv("dqn.eps_decay_steps", h.eps_decay_steps.to_string());
        kv("dqn.batch_size", h.batch_size.to_string());
        kv("dqn.target_sync_period", h.target_sync_period.to_string());
        kv("dqn.buffer_capacity", h.buffer_capacity.to_string());
        kv("dqn.train_steps", h.train_steps.to_string());
        kv("dqn.warmup_steps", h.warmup_steps.to_string());
        kv("dqn.hidden1", h.hidden1.to_string());
        kv("dqn.hidden2", h.hidden2.to_string());
        kv("dqn.optimizer", h.optimizer.name().into());
        kv("dqn.reward_scale", format!("{:?}", h.reward_scale));
        if with_seed {
            kv("dqn.seed", h.seed.to_string());
        }
        kv("scenario.scheme", self.scheme.name().into());
        kv("scenario.num_seeds", self.num_seeds.to_string());
        kv("scenario.eval_steps", self.eval_steps.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sections_comments_and_fractions() {
        let cfg = ScenarioConfig::parse(
            "# scenario\nenv.num_users = 5\n\nchannel.a_out = 1/200  # low blockage\n\
             dqn.optimizer = adam\nscenario.scheme = DRL-2\ndqn.train_steps = 4_000\n",
        )
        .unwrap();
        assert_eq!(cfg.env.num_users, 5);
        assert_eq!(cfg.channel.a_out, 1.0 / 200.0);
        assert_eq!(cfg.hyper.optimizer, OptimizerKind::Adam);
        assert_eq!(cfg.scheme, Scheme::Drl2);
        assert_eq!(cfg.hyper.eps_decay_steps, 2_000);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(ScenarioConfig::parse("env.users = 3"), Err(Error::Config(_))));
        assert!(ScenarioConfig::parse("env.num_users = 3\nenv.num_users = 4").is_err());
        assert!(ScenarioConfig::parse("env.num_users").is_err());
        assert!(ScenarioConfig::parse("channel.a_out = fast").is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(ScenarioConfig::parse("env.num_users = 20\nenv.num_blocks = 20").is_err());
        assert!(ScenarioConfig::parse("dqn.gamma = 1.0").is_err());
        assert!(ScenarioConfig::parse("scenario.num_seeds = 0").is_err());
    }

    #[test]
    fn scheme_forces_utility() {
        let cfg = ScenarioConfig::parse("env.utility = sqrt").unwrap();
        assert_eq!(cfg.env_for(Scheme::Drl1).utility, Utility::Log);
        assert_eq!(cfg.env_for(Scheme::Drl2).utility, Utility::Sqrt);
        assert_eq!(cfg.env_for(Scheme::Myopic).utility, Utility::Sqrt);
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = ScenarioConfig::parse("dqn.seed = 1").unwrap();
        let b = ScenarioConfig::parse("dqn.seed = 2").unwrap();
        let c = ScenarioConfig::parse("dqn.seed = 1\nenv.num_users = 3").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    proptest! {
        #[test]
        fn canonical_rendering_round_trips(
            k in 1usize..8,
            a_out in 1e-4f64..1.0,
            lambda in 0.0f64..=1.0,
            steps in 1usize..100_000,
            seed in any::<u64>(),
            sqrt in any::<bool>(),
        ) {
            let mut cfg = ScenarioConfig::default();
            cfg.env.num_users = k;
            cfg.env.utility = if sqrt { Utility::Sqrt } else { Utility::Log };
            cfg.channel.a_out = a_out;
            cfg.channel.dwell_lambda = lambda;
            cfg.hyper.train_steps = steps;
            cfg.hyper.seed = seed;
            let back = ScenarioConfig::parse(&cfg.to_config_string()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
