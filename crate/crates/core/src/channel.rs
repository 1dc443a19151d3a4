//! Per-user mmWave link model: a three-state blockage chain, distance-based
//! path loss and the resulting achievable downlink rate.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Link regime of one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkState {
    Los,
    Nlos,
    Outage,
}

impl LinkState {
    pub const ALL: [LinkState; 3] = [LinkState::Los, LinkState::Nlos, LinkState::Outage];

    /// Position in the `(LOS, NLOS, OUTAGE)` one-hot layout.
    pub fn index(self) -> usize {
        match self {
            LinkState::Los => 0,
            LinkState::Nlos => 1,
            LinkState::Outage => 2,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

/// Channel model constants. Defaults are the 73 GHz parameter set with the
/// link-budget plumbing used by the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Blockage decay coefficient, 1/m.
    pub a_out: f64,
    pub b_out: f64,
    /// LOS decay coefficient, 1/m.
    pub a_los: f64,
    pub los_alpha_db: f64,
    pub los_beta: f64,
    pub nlos_alpha_db: f64,
    pub nlos_beta: f64,
    /// NLOS shadowing standard deviation, dB.
    pub nlos_sigma_db: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Combined TX+RX beamforming gain, dB.
    pub antenna_gain_db: f64,
    /// Spectral-efficiency ceiling, bit/s/Hz.
    pub se_cap_bps_hz: f64,
    /// Per-step probability of resampling the link state.
    pub dwell_lambda: f64,
    /// Keep one shadowing draw for as long as the link stays in NLOS instead
    /// of redrawing it every step.
    pub freeze_shadowing: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            a_out: 1.0 / 30.0,
            b_out: 5.2,
            a_los: 1.0 / 67.1,
            los_alpha_db: 69.8,
            los_beta: 2.0,
            nlos_alpha_db: 82.7,
            nlos_beta: 2.69,
            nlos_sigma_db: 7.7,
            bandwidth_hz: 1e9,
            tx_power_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            antenna_gain_db: 30.0,
            se_cap_bps_hz: 8.0,
            dwell_lambda: 0.2,
            freeze_shadowing: false,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.a_out > 0.0, "a_out must be positive"),
            (self.a_los > 0.0, "a_los must be positive"),
            (self.bandwidth_hz > 0.0, "bandwidth_hz must be positive"),
            (self.nlos_sigma_db >= 0.0, "nlos_sigma_db must be nonnegative"),
            (
                (0.0..=1.0).contains(&self.dwell_lambda),
                "dwell_lambda must lie in [0, 1]",
            ),
            (self.se_cap_bps_hz > 0.0, "se_cap_bps_hz must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.to_string()));
            }
        }
        Ok(())
    }

    /// Thermal noise power over the whole band, dBm.
    pub fn noise_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Largest rate any link can reach, bit/s.
    pub fn max_rate_bps(&self) -> f64 {
        self.se_cap_bps_hz * self.bandwidth_hz
    }
}

/// Stationary probabilities `(p_los, p_nlos, p_out)` at distance `d` metres.
pub fn steady_probs(d: f64, p: &ChannelParams) -> (f64, f64, f64) {
    let p_out = (1.0 - (-p.a_out * d + p.b_out).exp()).clamp(0.0, 1.0);
    let p_los = ((1.0 - p_out) * (-p.a_los * d).exp()).clamp(0.0, 1.0 - p_out);
    let p_nlos = (1.0 - p_out - p_los).max(0.0);
    (p_los, p_nlos, p_out)
}

fn sample_steady<R: Rng + ?Sized>(d: f64, p: &ChannelParams, rng: &mut R) -> LinkState {
    let (p_los, p_nlos, _) = steady_probs(d, p);
    let u: f64 = rng.random();
    if u < p_los {
        LinkState::Los
    } else if u < p_los + p_nlos {
        LinkState::Nlos
    } else {
        LinkState::Outage
    }
}

/// One user's link: fixed distance to the base station plus the current
/// state of its blockage chain.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub distance_m: f64,
    pub state: LinkState,
    shadow_db: Option<f64>,
}

impl UserChannel {
    pub fn new(distance_m: f64, state: LinkState) -> Result<Self> {
        if !(distance_m > 0.0) {
            return Err(Error::Domain(format!(
                "user distance must be positive, got {distance_m}"
            )));
        }
        Ok(Self {
            distance_m,
            state,
            shadow_db: None,
        })
    }

    /// Places a user uniformly over the disk of radius `radius_m` and draws
    /// its initial state from the stationary distribution.
    pub fn random<R: Rng + ?Sized>(radius_m: f64, p: &ChannelParams, rng: &mut R) -> Self {
        // 1 - U lies in (0, 1], so the distance is strictly positive.
        let u: f64 = 1.0 - rng.random::<f64>();
        let distance_m = radius_m * u.sqrt();
        let state = sample_steady(distance_m, p, rng);
        Self {
            distance_m,
            state,
            shadow_db: None,
        }
    }

    /// Advances the blockage chain by one step in place.
    pub fn advance<R: Rng + ?Sized>(&mut self, p: &ChannelParams, rng: &mut R) {
        let next = advance_state(self, p, rng);
        if next != self.state {
            self.shadow_db = None;
        }
        self.state = next;
    }

    /// Achievable rate for the current state, honouring `freeze_shadowing`.
    pub fn rate<R: Rng + ?Sized>(&mut self, p: &ChannelParams, rng: &mut R) -> Result<f64> {
        if p.freeze_shadowing && self.state == LinkState::Nlos {
            let shadow = match self.shadow_db {
                Some(s) => s,
                None => {
                    let s = draw_shadowing(p, rng);
                    self.shadow_db = Some(s);
                    s
                }
            };
            let pl = deterministic_path_loss_db(self.distance_m, self.state, p)? + shadow;
            return Ok(rate_from_path_loss_db(pl, p));
        }
        achievable_rate(self, p, rng)
    }
}

/// Next link state under the resampling chain: with probability
/// `1 - dwell_lambda` the state is kept, otherwise it is redrawn from the
/// stationary distribution at the user's distance.
pub fn advance_state<R: Rng + ?Sized>(u: &UserChannel, p: &ChannelParams, rng: &mut R) -> LinkState {
    let resample: f64 = rng.random();
    if resample < p.dwell_lambda {
        sample_steady(u.distance_m, p, rng)
    } else {
        u.state
    }
}

fn draw_shadowing<R: Rng + ?Sized>(p: &ChannelParams, rng: &mut R) -> f64 {
    if p.nlos_sigma_db > 0.0 {
        Normal::new(0.0, p.nlos_sigma_db)
            .expect("validated sigma")
            .sample(rng)
    } else {
        0.0
    }
}

fn deterministic_path_loss_db(d: f64, s: LinkState, p: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path loss needs d > 0, got {d}")));
    }
    Ok(match s {
        LinkState::Los => p.los_alpha_db + p.los_beta * 10.0 * d.log10(),
        LinkState::Nlos => p.nlos_alpha_db + p.nlos_beta * 10.0 * d.log10(),
        LinkState::Outage => f64::INFINITY,
    })
}

/// Path loss in dB; `f64::INFINITY` marks an outage. NLOS links carry a
/// fresh log-normal shadowing term.
pub fn path_loss_db<R: Rng + ?Sized>(
    d: f64,
    s: LinkState,
    p: &ChannelParams,
    rng: &mut R,
) -> Result<f64> {
    let base = deterministic_path_loss_db(d, s, p)?;
    Ok(match s {
        LinkState::Nlos => base + draw_shadowing(p, rng),
        _ => base,
    })
}

/// Received SNR in dB for a given path loss.
pub fn snr_db(path_loss_db: f64, p: &ChannelParams) -> f64 {
    p.tx_power_dbm + p.antenna_gain_db - path_loss_db - p.noise_dbm()
}

/// Capped Shannon rate for a given SNR, bit/s.
pub fn rate_from_snr_db(snr_db: f64, p: &ChannelParams) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    (1.0 + snr).log2().min(p.se_cap_bps_hz) * p.bandwidth_hz
}

/// Capped Shannon rate behind a given path loss; infinite loss gives zero.
pub fn rate_from_path_loss_db(path_loss_db: f64, p: &ChannelParams) -> f64 {
    if path_loss_db.is_infinite() {
        0.0
    } else {
        rate_from_snr_db(snr_db(path_loss_db, p), p)
    }
}

/// Achievable downlink rate of a user in its current state, bit/s.
pub fn achievable_rate<R: Rng + ?Sized>(
    u: &UserChannel,
    p: &ChannelParams,
    rng: &mut R,
) -> Result<f64> {
    let pl = path_loss_db(u.distance_m, u.state, p, rng)?;
    Ok(rate_from_path_loss_db(pl, p))
}
