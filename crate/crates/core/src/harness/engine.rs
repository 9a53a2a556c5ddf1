//! Monte Carlo engine.
//!
//! Each trial draws its channels once from its own substreams and evaluates
//! every SNR point from that draw. Trials are grouped in fixed chunks that
//! are summed sequentially and merged in chunk order, so the output does not
//! depend on how many worker threads ran them.

use rayon::prelude::*;

use super::config::{DfePivots, Direction, ScenarioConfig};
use super::csv::CurvePoint;
use crate::downlink::epsilon;
use crate::equalizers::{
    cholesky_factors, static_dfe_pivots, superposed_sinr, trailing_pivots, EqualizerKind,
};
use crate::error::{Error, Result};
use crate::grid_channel::sample_realization;
use crate::linalg::PIVOT_THRESHOLD;
use crate::rng::{Substreams, STREAM_SCHEDULER, STREAM_U0};
use crate::scheduling::{schedule, UserPool};
use crate::stats::Moments;
use crate::transforms::{
    build_block_circulant, diagonalize, mean_inverse_power, nomauser_diagonalize,
};
use crate::uplink::{RateMode, U0Coupling, UplinkDraw, UplinkSetup};

/// Trials per work unit.
pub const CHUNK_TRIALS: u64 = 256;

/// Noise terms (φ or 1/λ) of the high-mobility user's reported symbols.
#[derive(Debug, Clone)]
enum U0Noise {
    /// Every symbol sees the same value (FD-LE).
    Uniform(f64),
    /// One value per symbol, row-major (full FD-DFE).
    PerSymbol(Vec<f64>),
    /// Only the last symbol (trailing FD-DFE pivot).
    LastOnly(f64),
}

fn inverse_pivot(lambda: f64) -> f64 {
    if lambda > PIVOT_THRESHOLD {
        1.0 / lambda
    } else {
        f64::INFINITY
    }
}

/// Outage summary of one trial at one SNR: aggregate (mean over symbols),
/// first symbol and last symbol. Aggregate and first are absent when only
/// the last symbol was factored.
#[derive(Debug, Clone, Copy)]
struct SymbolOutage {
    aggregate: Option<f64>,
    first: Option<f64>,
    last: f64,
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl U0Noise {
    fn outage(&self, fails: impl Fn(f64) -> bool) -> SymbolOutage {
        match self {
            U0Noise::Uniform(noise) => {
                let v = indicator(fails(*noise));
                SymbolOutage {
                    aggregate: Some(v),
                    first: Some(v),
                    last: v,
                }
            }
            U0Noise::PerSymbol(noise) => {
                let count = noise.iter().filter(|&&n| fails(n)).count();
                SymbolOutage {
                    aggregate: Some(count as f64 / noise.len() as f64),
                    first: Some(indicator(fails(noise[0]))),
                    last: indicator(fails(noise[noise.len() - 1])),
                }
            }
            U0Noise::LastOnly(noise) => SymbolOutage {
                aggregate: None,
                first: None,
                last: indicator(fails(*noise)),
            },
        }
    }
}

/// One low-mobility subchannel as seen by the user scheduled on it.
#[derive(Debug, Clone)]
struct SubchannelState {
    /// Stage-I noise terms, one per delay index (or one for FD-LE).
    stage1_noise: Vec<f64>,
    /// |D̃^m|² of the scheduled user.
    gain: f64,
}

#[derive(Debug, Clone)]
struct DownlinkTrial {
    u0: U0Noise,
    subchannels: Vec<SubchannelState>,
}

enum TrialState {
    Downlink(DownlinkTrial),
    Uplink(UplinkDraw),
}

/// Names of the metrics a scenario reports, in evaluation order.
pub fn metric_names(config: &ScenarioConfig) -> Vec<&'static str> {
    let full = !(config.equalizer == EqualizerKind::Dfe && config.dfe_pivots == DfePivots::Last);
    let mut names = Vec::new();
    if full {
        names.extend(["u0_outage", "u0_outage_first"]);
    }
    names.push("u0_outage_last");
    if full {
        names.push("u0_outage_oma");
    }
    match (config.direction, config.rate_mode) {
        (Direction::Uplink, RateMode::Adaptive) => names.push("ergodic_rate_gain"),
        _ => names.push("noma_outage"),
    }
    if full {
        names.extend(["outage_sum_rate_oma", "outage_sum_rate_noma"]);
    }
    names
}

struct Runner<'a> {
    config: &'a ScenarioConfig,
    streams: Substreams,
    rhos: Vec<f64>,
    metrics: usize,
    uplink: Option<UplinkSetup>,
}

impl<'a> Runner<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self> {
        let uplink = match config.direction {
            Direction::Uplink => {
                let setup = UplinkSetup {
                    grid: config.grid,
                    u0_profile: config.u0_profile.clone(),
                    noma_profile: config.noma_profile.clone(),
                    users: config.users,
                    scheduler: config.scheduler,
                    equalizer: config.equalizer,
                    dfe_trailing: (config.dfe_pivots == DfePivots::Last).then_some(1),
                };
                setup.validate()?;
                Some(setup)
            }
            Direction::Downlink => None,
        };
        Ok(Runner {
            config,
            streams: Substreams::new(config.seed),
            rhos: config
                .snr_db
                .iter()
                .map(|db| 10f64.powf(db / 10.0))
                .collect(),
            metrics: metric_names(config).len(),
            uplink,
        })
    }

    fn draw(&self, trial: u64) -> Result<TrialState> {
        match &self.uplink {
            Some(setup) => Ok(TrialState::Uplink(setup.draw(&self.streams, trial)?)),
            None => Ok(TrialState::Downlink(self.draw_downlink(trial)?)),
        }
    }

    fn draw_downlink(&self, trial: u64) -> Result<DownlinkTrial> {
        let cfg = self.config;
        let grid = &cfg.grid;
        let u0 = sample_realization(&cfg.u0_profile, &mut self.streams.stream(trial, STREAM_U0));
        let channel = build_block_circulant(&u0, grid)?;
        let u0_noise = match (cfg.equalizer, cfg.dfe_pivots) {
            (EqualizerKind::Le, _) => U0Noise::Uniform(diagonalize(&channel).noise_enhancement()),
            (EqualizerKind::Dfe, DfePivots::All) => match cholesky_factors(&channel) {
                Ok(f) => U0Noise::PerSymbol(f.lambda().iter().map(|&l| inverse_pivot(l)).collect()),
                Err(Error::SingularChannel(_)) => {
                    U0Noise::PerSymbol(vec![f64::INFINITY; grid.cells()])
                }
                Err(e) => return Err(e),
            },
            (EqualizerKind::Dfe, DfePivots::Last) => match trailing_pivots(&channel, 1) {
                Ok(l) => U0Noise::LastOnly(inverse_pivot(l[0])),
                Err(Error::SingularChannel(_)) => U0Noise::LastOnly(f64::INFINITY),
                Err(e) => return Err(e),
            },
        };

        let realizations: Vec<_> = (0..cfg.users)
            .map(|u| {
                sample_realization(
                    &cfg.noma_profile,
                    &mut self.streams.stream(trial, u as u32 + 1),
                )
            })
            .collect();
        let diagonals = realizations
            .iter()
            .map(|r| nomauser_diagonalize(r, grid))
            .collect::<Result<Vec<_>>>()?;
        let pool = UserPool::from_diagonals(&diagonals)?;
        let chosen = schedule(
            cfg.scheduler,
            &pool,
            &mut self.streams.stream(trial, STREAM_SCHEDULER),
        )?;

        let mut stage1: Vec<Option<Vec<f64>>> = vec![None; cfg.users];
        let mut subchannels = Vec::with_capacity(grid.m());
        for (m, &u) in chosen.iter().enumerate() {
            if stage1[u].is_none() {
                stage1[u] = Some(match cfg.equalizer {
                    EqualizerKind::Le => vec![mean_inverse_power(&diagonals[u])],
                    EqualizerKind::Dfe => match static_dfe_pivots(&realizations[u], grid) {
                        Ok(l) => l.iter().map(|&v| inverse_pivot(v)).collect(),
                        Err(Error::SingularChannel(_)) => vec![f64::INFINITY],
                        Err(e) => return Err(e),
                    },
                });
            }
            subchannels.push(SubchannelState {
                stage1_noise: stage1[u].clone().expect("filled above"),
                gain: pool.gains(u)[m],
            });
        }
        Ok(DownlinkTrial {
            u0: u0_noise,
            subchannels,
        })
    }

    /// Metric values of one trial at one SNR, in [`metric_names`] order.
    fn evaluate(&self, state: &TrialState, rho: f64, out: &mut Vec<f64>) {
        let cfg = self.config;
        let (r0, ri) = (cfg.rate_u0, cfg.rate_noma);
        let (eps0, epsi) = (epsilon(r0), epsilon(ri));
        out.clear();
        let (u0, u0_oma, noma_value, noma_rate) = match state {
            TrialState::Downlink(t) => {
                let power = cfg.power;
                let u0 = t.u0.outage(|n| !(superposed_sinr(n, rho, &power) > eps0));
                let oma = t.u0.outage(|n| !(n.is_finite() && rho / n > eps0));
                let fails = t
                    .subchannels
                    .iter()
                    .filter(|s| {
                        let stage2 = rho * power.gamma1_sq() * s.gain;
                        let stage1_ok = s
                            .stage1_noise
                            .iter()
                            .all(|&n| superposed_sinr(n, rho, &power) > eps0);
                        !(stage2 > epsi && stage1_ok)
                    })
                    .count();
                let frac = fails as f64 / t.subchannels.len() as f64;
                (u0, oma, frac, (1.0 - frac) * ri)
            }
            TrialState::Uplink(d) => {
                let summarize = |flags: Vec<bool>| {
                    let count = flags.iter().filter(|&&f| f).count();
                    if flags.len() == cfg.grid.cells() {
                        SymbolOutage {
                            aggregate: Some(count as f64 / flags.len() as f64),
                            first: Some(indicator(flags[0])),
                            last: indicator(flags[flags.len() - 1]),
                        }
                    } else {
                        SymbolOutage {
                            aggregate: None,
                            first: None,
                            last: indicator(flags[flags.len() - 1]),
                        }
                    }
                };
                let u0 =
                    summarize(d.u0_outage_flags(rho, eps0, epsi, cfg.rate_mode, U0Coupling::Joint));
                let oma = summarize(d.u0_outage_flags(
                    rho,
                    eps0,
                    epsi,
                    cfg.rate_mode,
                    U0Coupling::GenieStage1,
                ));
                match cfg.rate_mode {
                    RateMode::Adaptive => {
                        let gain = d.ergodic_rate(rho);
                        (u0, oma, gain, gain)
                    }
                    RateMode::Fixed => {
                        let frac = d.noma_outage_fraction(rho, epsi);
                        (u0, oma, frac, (1.0 - frac) * ri)
                    }
                }
            }
        };
        if let (Some(agg), Some(first)) = (u0.aggregate, u0.first) {
            out.extend([agg, first]);
        }
        out.push(u0.last);
        if let Some(agg) = u0_oma.aggregate {
            out.push(agg);
        }
        out.push(noma_value);
        if let (Some(agg), Some(oma)) = (u0.aggregate, u0_oma.aggregate) {
            out.push((1.0 - oma) * r0);
            out.push((1.0 - agg) * r0 + noma_rate);
        }
        debug_assert_eq!(out.len(), self.metrics);
    }

    fn run_chunk(&self, chunk: u64) -> Result<Vec<Moments>> {
        let start = chunk * CHUNK_TRIALS;
        let end = (start + CHUNK_TRIALS).min(self.config.trials);
        let mut acc = vec![Moments::default(); self.rhos.len() * self.metrics];
        let mut values = Vec::with_capacity(self.metrics);
        for trial in start..end {
            let state = self.draw(trial)?;
            for (s, &rho) in self.rhos.iter().enumerate() {
                self.evaluate(&state, rho, &mut values);
                for (k, v) in values.iter().enumerate() {
                    acc[s * self.metrics + k].push(*v);
                }
            }
        }
        Ok(acc)
    }
}

/// Runs a scenario on the current rayon pool.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<CurvePoint>> {
    let runner = Runner::new(config)?;
    let chunks = config.trials.div_ceil(CHUNK_TRIALS);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| runner.run_chunk(c))
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![Moments::default(); runner.rhos.len() * runner.metrics];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let names = metric_names(config);
    let mut points = Vec::with_capacity(total.len());
    for (s, &snr_db) in config.snr_db.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            let e = total[s * runner.metrics + k].estimate();
            points.push(CurvePoint {
                snr_db,
                metric: (*name).to_string(),
                value: e.value,
                ci_halfwidth: e.ci_halfwidth,
                trials: e.trials,
            });
        }
    }
    Ok(points)
}

/// Runs a scenario on a dedicated pool of `threads` workers.
pub fn run_scenario_with_threads(
    config: &ScenarioConfig,
    threads: usize,
) -> Result<Vec<CurvePoint>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_scenario(config))
}
