//! Uplink base-station receiver.
//!
//! Stage I reads each scheduled low-mobility user straight off the
//! time-frequency grid with U₀ as interference. Stage II removes those
//! signals and detects U₀ in the delay-Doppler plane. The closed-form outage
//! expressions for per-subchannel scheduling live here as well.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equalizers::{
    cholesky_factors, dfe_sinrs_from_pivots, trailing_pivots, EqualizerKind, PowerAllocation,
};
use crate::error::{Error, Result};
use crate::grid_channel::{complex_gaussian, sample_realization, ChannelProfile, Grid};
use crate::rng::{Substreams, STREAM_SCHEDULER, STREAM_U0};
use crate::scheduling::{schedule, SchedulerKind, UserPool};
use crate::stats::{Estimate, Moments};
use crate::transforms::{
    build_block_circulant, diagonalize, nomauser_diagonalize, BlockCirculantChannel, Domain, Frame,
};

/// Time-frequency observation Y[n,m] = H₀[n,m]X₀[n,m] + H_s[m]X_s[n,m] + W[n,m],
/// where `s` is the user scheduled on subchannel m.
#[derive(Debug, Clone)]
pub struct UplinkObservation {
    y: Frame,
    u0_response: Vec<Complex64>,
    noma_response: Vec<Complex64>,
}

impl UplinkObservation {
    /// `u0_response` has NM values (row-major), `noma_response` one value per
    /// subchannel.
    pub fn new(
        y: Frame,
        u0_response: Vec<Complex64>,
        noma_response: Vec<Complex64>,
    ) -> Result<Self> {
        y.expect_domain(Domain::TimeFrequency)?;
        let g = *y.grid();
        if u0_response.len() != g.cells() || noma_response.len() != g.m() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} U0 values and {} NOMA values", g.cells(), g.m()),
                found: format!("{} and {}", u0_response.len(), noma_response.len()),
            });
        }
        Ok(UplinkObservation {
            y,
            u0_response,
            noma_response,
        })
    }

    /// Forms the observation from transmitted time-frequency symbols and
    /// adds unit-variance noise.
    pub fn synthesize<R: Rng + ?Sized>(
        u0_tx: &Frame,
        noma_tx: &Frame,
        u0_response: Vec<Complex64>,
        noma_response: Vec<Complex64>,
        noise: &mut R,
    ) -> Result<Self> {
        u0_tx.expect_domain(Domain::TimeFrequency)?;
        noma_tx.expect_domain(Domain::TimeFrequency)?;
        let g = *u0_tx.grid();
        if noma_tx.grid() != &g {
            return Err(Error::invalid("U0 and NOMA frames use different grids"));
        }
        let mut y = Frame::zeros(g, Domain::TimeFrequency);
        let sigma = std::f64::consts::FRAC_1_SQRT_2;
        if u0_response.len() != g.cells() || noma_response.len() != g.m() {
            return Self::new(y, u0_response, noma_response);
        }
        for n in 0..g.n() {
            for m in 0..g.m() {
                let i = g.index(n, m);
                y.values_mut()[i] = u0_response[i] * u0_tx.values()[i]
                    + noma_response[m] * noma_tx.values()[i]
                    + complex_gaussian(noise, sigma);
            }
        }
        Self::new(y, u0_response, noma_response)
    }

    pub fn y(&self) -> &Frame {
        &self.y
    }

    /// One-tap stage-I estimate Y[n,m] / H_s[m] for every cell.
    pub fn stage1_estimates(&self) -> Vec<Complex64> {
        let g = self.y.grid();
        (0..g.cells())
            .map(|i| self.y.values()[i] / self.noma_response[i % g.m()])
            .collect()
    }

    /// Stage-I SINR of every cell at transmit SNR `rho`.
    pub fn stage1_sinrs(&self, rho: f64) -> Vec<f64> {
        let m = self.y.grid().m();
        self.u0_response
            .iter()
            .enumerate()
            .map(|(i, h0)| uplink_stage1_sinr(self.noma_response[i % m], *h0, rho))
            .collect()
    }
}

/// ρ|hᵢ|² / (ρ|h₀|² + 1).
#[inline]
pub fn uplink_stage1_sinr(h_i: Complex64, h_0: Complex64, rho: f64) -> f64 {
    rho * h_i.norm_sqr() / (rho * h_0.norm_sqr() + 1.0)
}

/// The largest rate that stage I always decodes: log₂(1 + SINR).
#[inline]
pub fn adaptive_rate(h_i: Complex64, h_0: Complex64, rho: f64) -> f64 {
    uplink_stage1_sinr(h_i, h_0, rho).ln_1p() / std::f64::consts::LN_2
}

fn check_outage_args(k: usize, epsilon: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// B_j = ∫(1 − e^{−εy})^j e^{−y} dy = j! ε^j / Π_{i=1}^{j}(1 + iε), j = 0..=k.
fn beta_moments(k: usize, epsilon: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut b = 1.0;
    out.push(b);
    for j in 1..=k {
        let jf = j as f64;
        b *= jf * epsilon / (1.0 + jf * epsilon);
        out.push(b);
    }
    out
}

/// Outage of the per-subchannel-scheduled NOMA user at rate threshold ε:
/// P(max of K unit exponentials < ε(1 + ρ|h₀|²)/ρ).
///
/// Evaluated as Σ_j C(K,j)(1−c)^{K−j} c^j B_j with c = e^{−ε/ρ}; every term
/// is nonnegative, so there is no cancellation at any K.
pub fn closed_form_outage(k: usize, epsilon: f64, rho: f64) -> Result<f64> {
    check_outage_args(k, epsilon)?;
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    let c = (-epsilon / rho).exp();
    let one_minus_c = -(-epsilon / rho).exp_m1();
    let b = beta_moments(k, epsilon);
    let mut binom = 1.0;
    let mut total = 0.0;
    for (j, bj) in b.iter().enumerate() {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        total += binom * one_minus_c.powi((k - j) as i32) * c.powi(j as i32) * bj;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// High-SNR limit of [`closed_form_outage`]: K! ε^K / Π_{k=1}^{K}(1 + kε).
pub fn error_floor(k: usize, epsilon: f64) -> Result<f64> {
    check_outage_args(k, epsilon)?;
    Ok(beta_moments(k, epsilon)[k])
}

/// Small-ε approximation K!·ε^K of the floor.
pub fn floor_approx(k: usize, epsilon: f64) -> Result<f64> {
    check_outage_args(k, epsilon)?;
    Ok((1..=k).fold(1.0, |acc, j| acc * j as f64 * epsilon))
}

/// Interference-free stage-II SINRs for U₀ after every NOMA signal has been
/// removed. A singular channel yields zeros.
pub fn uplink_stage2_sinrs(
    channel: &BlockCirculantChannel,
    rho: f64,
    equalizer: EqualizerKind,
) -> Result<Vec<f64>> {
    let oma = PowerAllocation::oma();
    let cells = channel.grid().cells();
    Ok(match equalizer {
        EqualizerKind::Le => {
            let phi = diagonalize(channel).noise_enhancement();
            let sinr = if phi.is_finite() { rho / phi } else { 0.0 };
            vec![sinr; cells]
        }
        EqualizerKind::Dfe => match cholesky_factors(channel) {
            Ok(f) => dfe_sinrs_from_pivots(f.lambda(), rho, &oma),
            Err(Error::SingularChannel(_)) => vec![0.0; cells],
            Err(e) => return Err(e),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// NOMA users pick log₂(1 + SINR) so stage I never fails.
    Adaptive,
    /// NOMA users transmit at a fixed rate and stage I can fail.
    Fixed,
}

/// How U₀'s outage treats stage I.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum U0Coupling {
    /// U₀ succeeds only if every stage-I detection succeeded.
    Joint,
    /// Stage I assumed perfect.
    GenieStage1,
}

/// Per-trial channel state for the uplink: one realization of U₀ and of
/// every low-mobility user plus the schedule.
#[derive(Debug, Clone)]
pub struct UplinkDraw {
    grid: Grid,
    /// |D₀^{n,m}|², row-major.
    u0_gains: Vec<f64>,
    /// |D̃_{s(m)}^m|² for the user s(m) scheduled on subchannel m.
    scheduled_gains: Vec<f64>,
    /// φ for FD-LE (one value) or DFE pivots of the reported symbols.
    stage2_noise: Stage2Noise,
}

#[derive(Debug, Clone)]
enum Stage2Noise {
    Linear(f64),
    Pivots(Vec<f64>),
}

/// Everything fixed across trials of an uplink run.
#[derive(Debug, Clone)]
pub struct UplinkSetup {
    pub grid: Grid,
    pub u0_profile: ChannelProfile,
    pub noma_profile: ChannelProfile,
    pub users: usize,
    pub scheduler: SchedulerKind,
    pub equalizer: EqualizerKind,
    /// DFE only: compute the last `n` pivots instead of all NM.
    pub dfe_trailing: Option<usize>,
}

impl UplinkSetup {
    pub fn validate(&self) -> Result<()> {
        self.u0_profile.check_fits(&self.grid)?;
        self.noma_profile.check_fits(&self.grid)?;
        if !self.noma_profile.is_doppler_free() {
            return Err(Error::invalid(
                "low-mobility profile must have all Doppler taps at 0",
            ));
        }
        if self.users == 0 {
            return Err(Error::invalid("need at least one low-mobility user"));
        }
        if self.scheduler == SchedulerKind::Random && self.users < self.grid.m() {
            return Err(Error::invalid(format!(
                "random scheduling needs K >= M = {}, got K = {}",
                self.grid.m(),
                self.users
            )));
        }
        Ok(())
    }

    /// Draws trial `trial` from its own substreams.
    pub fn draw(&self, streams: &Substreams, trial: u64) -> Result<UplinkDraw> {
        let u0 = sample_realization(&self.u0_profile, &mut streams.stream(trial, STREAM_U0));
        let channel = build_block_circulant(&u0, &self.grid)?;
        let d0 = diagonalize(&channel);
        let diagonals = (0..self.users)
            .map(|u| {
                let r = sample_realization(
                    &self.noma_profile,
                    &mut streams.stream(trial, u as u32 + 1),
                );
                nomauser_diagonalize(&r, &self.grid)
            })
            .collect::<Result<Vec<_>>>()?;
        let pool = UserPool::from_diagonals(&diagonals)?;
        let chosen = schedule(
            self.scheduler,
            &pool,
            &mut streams.stream(trial, STREAM_SCHEDULER),
        )?;
        let scheduled_gains = chosen
            .iter()
            .enumerate()
            .map(|(m, &u)| pool.gains(u)[m])
            .collect();
        let stage2_noise = match self.equalizer {
            EqualizerKind::Le => Stage2Noise::Linear(d0.noise_enhancement()),
            EqualizerKind::Dfe => {
                let pivots = match self.dfe_trailing {
                    Some(count) => trailing_pivots(&channel, count),
                    None => cholesky_factors(&channel).map(|f| f.lambda().to_vec()),
                };
                match pivots {
                    Ok(p) => Stage2Noise::Pivots(p),
                    Err(Error::SingularChannel(_)) => {
                        Stage2Noise::Pivots(vec![
                            0.0;
                            self.dfe_trailing.unwrap_or(self.grid.cells())
                        ])
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(UplinkDraw {
            grid: self.grid,
            u0_gains: d0.values().iter().map(Complex64::norm_sqr).collect(),
            scheduled_gains,
            stage2_noise,
        })
    }
}

impl UplinkDraw {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn u0_gains(&self) -> &[f64] {
        &self.u0_gains
    }

    pub fn scheduled_gains(&self) -> &[f64] {
        &self.scheduled_gains
    }

    /// Stage-I SINR of every cell, row-major.
    pub fn stage1_sinrs(&self, rho: f64) -> Vec<f64> {
        let m = self.grid.m();
        self.u0_gains
            .iter()
            .enumerate()
            .map(|(i, g0)| rho * self.scheduled_gains[i % m] / (rho * g0 + 1.0))
            .collect()
    }

    /// Stage-II SINRs of U₀'s reported symbols (all NM for FD-LE or a full
    /// DFE factorization, otherwise the trailing pivots only).
    pub fn stage2_sinrs(&self, rho: f64) -> Vec<f64> {
        match &self.stage2_noise {
            Stage2Noise::Linear(phi) => {
                let s = if phi.is_finite() { rho / phi } else { 0.0 };
                vec![s; self.grid.cells()]
            }
            Stage2Noise::Pivots(p) => dfe_sinrs_from_pivots(p, rho, &PowerAllocation::oma()),
        }
    }

    /// Fraction of NOMA cells in outage at threshold `eps`.
    pub fn noma_outage_fraction(&self, rho: f64, eps: f64) -> f64 {
        let s = self.stage1_sinrs(rho);
        s.iter().filter(|&&v| !(v > eps)).count() as f64 / s.len() as f64
    }

    /// Mean of log₂(1 + SINR) over the NOMA cells.
    pub fn ergodic_rate(&self, rho: f64) -> f64 {
        let s = self.stage1_sinrs(rho);
        s.iter().map(|v| v.ln_1p()).sum::<f64>() / std::f64::consts::LN_2 / s.len() as f64
    }

    /// Per-symbol U₀ outage flags for the reported symbols.
    pub fn u0_outage_flags(
        &self,
        rho: f64,
        eps0: f64,
        eps_noma: f64,
        mode: RateMode,
        coupling: U0Coupling,
    ) -> Vec<bool> {
        let stage1_ok = match (mode, coupling) {
            (RateMode::Adaptive, _) | (_, U0Coupling::GenieStage1) => true,
            (RateMode::Fixed, U0Coupling::Joint) => {
                self.stage1_sinrs(rho).iter().all(|&s| s > eps_noma)
            }
        };
        self.stage2_sinrs(rho)
            .iter()
            .map(|&s| !(stage1_ok && s > eps0))
            .collect()
    }
}

/// Monte Carlo estimate of the fixed-rate NOMA-user outage (mean over cells).
pub fn fixed_rate_outage_mc(
    setup: &UplinkSetup,
    rho: f64,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    setup.validate()?;
    let streams = Substreams::new(seed);
    let mut acc = Moments::default();
    for t in 0..trials {
        acc.push(setup.draw(&streams, t)?.noma_outage_fraction(rho, epsilon));
    }
    Ok(acc.estimate())
}

/// Monte Carlo estimate of U₀'s uplink outage averaged over its reported
/// symbols.
pub fn uplink_u0_outage(
    setup: &UplinkSetup,
    rho: f64,
    eps0: f64,
    eps_noma: f64,
    mode: RateMode,
    coupling: U0Coupling,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    setup.validate()?;
    let streams = Substreams::new(seed);
    let mut acc = Moments::default();
    for t in 0..trials {
        let flags = setup
            .draw(&streams, t)?
            .u0_outage_flags(rho, eps0, eps_noma, mode, coupling);
        acc.push(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64);
    }
    Ok(acc.estimate())
}
