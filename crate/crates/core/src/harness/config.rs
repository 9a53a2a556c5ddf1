//! Scenario configuration files.
//!
//! A config is a flat list of `key = value` lines (TOML syntax). Every key
//! is listed in [`RawConfig`]; anything else is rejected.

use std::path::Path;

use serde::Deserialize;

use crate::equalizers::{EqualizerKind, PowerAllocation};
use crate::error::{Error, Result};
use crate::grid_channel::{
    make_grid, static_profile, vehicular_profile, ChannelProfile, Grid, Tap,
};
use crate::scheduling::SchedulerKind;
use crate::uplink::RateMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downlink,
    Uplink,
}

/// Which DFE pivots a run factors for the high-mobility user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfePivots {
    /// Full factorization: every symbol's SINR.
    All,
    /// Only the last symbol x₀[N−1, M−1]; far cheaper.
    Last,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    direction: Direction,
    n: usize,
    m: usize,
    #[serde(default = "default_delta_f")]
    delta_f: f64,
    users: usize,
    /// `[[delay, doppler], ...]`; defaults to the vehicular profile.
    u0_taps: Option<Vec<[usize; 2]>>,
    /// Delay taps of the Doppler-free low-mobility profile.
    noma_delays: Option<Vec<usize>>,
    gamma0_sq: Option<f64>,
    gamma1_sq: Option<f64>,
    rate_u0: f64,
    rate_noma: f64,
    rate_mode: Option<RateMode>,
    equalizer: EqualizerKind,
    scheduler: SchedulerKind,
    #[serde(default = "default_pivots")]
    dfe_pivots: DfePivots,
    snr_db: Vec<f64>,
    trials: u64,
    #[serde(default)]
    seed: u64,
}

fn default_delta_f() -> f64 {
    15e3
}

fn default_pivots() -> DfePivots {
    DfePivots::All
}

/// A validated experiment description.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub direction: Direction,
    pub grid: Grid,
    pub users: usize,
    pub u0_profile: ChannelProfile,
    pub noma_profile: ChannelProfile,
    pub power: PowerAllocation,
    pub rate_u0: f64,
    pub rate_noma: f64,
    pub rate_mode: RateMode,
    pub equalizer: EqualizerKind,
    pub scheduler: SchedulerKind,
    pub dfe_pivots: DfePivots,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

/// Delay taps of the default low-mobility profile: the vehicular delays
/// without Doppler.
pub const DEFAULT_NOMA_DELAYS: [usize; 4] = [2, 6, 10, 14];

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = message.split('`').nth(1).unwrap_or("config").to_string();
            Error::config(field, message)
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let grid = make_grid(raw.n, raw.m, raw.delta_f)
            .map_err(|e| Error::config("n/m/delta_f", e.to_string()))?;

        let u0_profile = match raw.u0_taps {
            None => vehicular_profile(),
            Some(taps) => ChannelProfile::new(taps.iter().map(|&[d, v]| Tap::new(d, v)).collect())
                .map_err(|e| Error::config("u0_taps", e.to_string()))?,
        };
        u0_profile
            .check_fits(&grid)
            .map_err(|e| Error::config("u0_taps", e.to_string()))?;
        let delays = raw
            .noma_delays
            .unwrap_or_else(|| DEFAULT_NOMA_DELAYS.to_vec());
        let noma_profile = static_profile(delays.len(), &delays)
            .map_err(|e| Error::config("noma_delays", e.to_string()))?;
        noma_profile
            .check_fits(&grid)
            .map_err(|e| Error::config("noma_delays", e.to_string()))?;

        if raw.users == 0 {
            return Err(Error::config(
                "users",
                "need at least one low-mobility user",
            ));
        }
        if raw.scheduler == SchedulerKind::Random && raw.users < raw.m {
            return Err(Error::config(
                "users",
                format!(
                    "random scheduling needs users >= m = {}, got {}",
                    raw.m, raw.users
                ),
            ));
        }

        let power = match raw.direction {
            Direction::Downlink => {
                let g0 = raw.gamma0_sq.unwrap_or(0.75);
                let g1 = raw.gamma1_sq.unwrap_or(1.0 - g0);
                PowerAllocation::new(g0, g1)
                    .map_err(|e| Error::config("gamma0_sq/gamma1_sq", e.to_string()))?
            }
            Direction::Uplink => {
                if raw.gamma0_sq.is_some() || raw.gamma1_sq.is_some() {
                    return Err(Error::config(
                        "gamma0_sq",
                        "uplink users transmit at equal power; remove the power split",
                    ));
                }
                PowerAllocation::oma()
            }
        };
        let rate_mode = match (raw.direction, raw.rate_mode) {
            (Direction::Downlink, Some(_)) => {
                return Err(Error::config("rate_mode", "only meaningful for the uplink"));
            }
            (Direction::Downlink, None) => RateMode::Fixed,
            (Direction::Uplink, mode) => mode.unwrap_or(RateMode::Fixed),
        };

        for (field, rate) in [("rate_u0", raw.rate_u0), ("rate_noma", raw.rate_noma)] {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::config(
                    field,
                    format!("must be positive, got {rate}"),
                ));
            }
        }
        if raw.snr_db.is_empty() {
            return Err(Error::config("snr_db", "needs at least one point"));
        }
        if raw.snr_db.iter().any(|s| !s.is_finite()) || raw.snr_db.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::config(
                "snr_db",
                "must be finite and strictly increasing",
            ));
        }
        if raw.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }

        Ok(ScenarioConfig {
            direction: raw.direction,
            grid,
            users: raw.users,
            u0_profile,
            noma_profile,
            power,
            rate_u0: raw.rate_u0,
            rate_noma: raw.rate_noma,
            rate_mode,
            equalizer: raw.equalizer,
            scheduler: raw.scheduler,
            dfe_pivots: raw.dfe_pivots,
            snr_db: raw.snr_db,
            trials: raw.trials,
            seed: raw.seed,
        })
    }
}
