//! Downlink transmitter and the two receiver chains.
//!
//! The high-mobility user U₀ detects its delay-Doppler symbols directly,
//! treating the NOMA layer as noise. Each low-mobility user first decodes
//! U₀'s symbols on its own Doppler-free channel (stage I), removes them,
//! and then reads its subchannel with a one-tap equalizer (stage II).

use num_complex::Complex64;
use rand::Rng;

use crate::equalizers::{
    cholesky_factors, fd_dfe_equalize, fd_le_equalize, fd_le_sinr, static_dfe_sinrs,
    superposed_sinr, Equalization, EqualizerKind, Feedback, PowerAllocation,
};
use crate::error::{Error, Result};
use crate::grid_channel::{complex_gaussian, ChannelRealization, Grid};
use crate::transforms::{
    diagonalize, isfft, mean_inverse_power, nomauser_diagonalize, sfft, BlockCirculantChannel,
    Domain, Frame,
};

/// SINR threshold 2^R − 1 for a target rate R in bits per channel use.
#[inline]
pub fn epsilon(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    rho: f64,
    rate_u0: f64,
    rate_noma: f64,
}

impl LinkConfig {
    pub fn new(rho: f64, rate_u0: f64, rate_noma: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        if !(rate_u0 > 0.0 && rate_noma > 0.0) {
            return Err(Error::invalid(format!(
                "target rates must be positive, got R0={rate_u0}, Ri={rate_noma}"
            )));
        }
        Ok(LinkConfig {
            rho,
            rate_u0,
            rate_noma,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rate_u0(&self) -> f64 {
        self.rate_u0
    }

    pub fn rate_noma(&self) -> f64 {
        self.rate_noma
    }

    /// ε₀ = 2^{R₀} − 1.
    pub fn eps_u0(&self) -> f64 {
        epsilon(self.rate_u0)
    }

    /// εᵢ = 2^{Rᵢ} − 1.
    pub fn eps_noma(&self) -> f64 {
        epsilon(self.rate_noma)
    }
}

/// Places NOMA user slot `m` (subchannel m) on column m: X̃[n, m] = x_{m+1}(n).
/// `noma_symbols[m][n]` holds x_{m+1}(n).
pub fn noma_layer(grid: &Grid, noma_symbols: &[Vec<Complex64>]) -> Result<Frame> {
    let (n, m) = (grid.n(), grid.m());
    if noma_symbols.len() != m || noma_symbols.iter().any(|s| s.len() != n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{m} users x {n} symbols"),
            found: format!(
                "{} users with lengths {:?}",
                noma_symbols.len(),
                noma_symbols.iter().map(Vec::len).collect::<Vec<_>>()
            ),
        });
    }
    let mut frame = Frame::zeros(*grid, Domain::TimeFrequency);
    for (slot, symbols) in noma_symbols.iter().enumerate() {
        for (t, &s) in symbols.iter().enumerate() {
            frame.values_mut()[grid.index(t, slot)] = s;
        }
    }
    Ok(frame)
}

/// X[n,m] = γ₀·ISFFT(x₀)[n,m] + γ₁·x_{m+1}(n).
pub fn build_tx_frame(
    u0_symbols: &Frame,
    noma_symbols: &[Vec<Complex64>],
    power: &PowerAllocation,
) -> Result<Frame> {
    let mut tx = isfft(u0_symbols)?;
    let layer = noma_layer(u0_symbols.grid(), noma_symbols)?;
    let (g0, g1) = (power.gamma0(), power.gamma1());
    for (x, s) in tx.values_mut().iter_mut().zip(layer.values()) {
        *x = g0 * *x + g1 * s;
    }
    Ok(tx)
}

/// What U₀ gets out of one received frame.
#[derive(Debug, Clone)]
pub struct U0Reception {
    /// Equalizer output (estimates of the superposition), absent when the
    /// channel was singular.
    pub estimates: Option<Frame>,
    pub sinrs: Vec<f64>,
    pub outage: Vec<bool>,
}

/// Passes `tx` through U₀'s channel with unit-variance delay-Doppler noise,
/// equalizes, and reports per-symbol SINRs and outage flags
/// (`log2(1 + SINR) < R₀`). The DFE runs with genie feedback.
pub fn u0_receive<R: Rng + ?Sized>(
    tx: &Frame,
    channel: &BlockCirculantChannel,
    noise: &mut R,
    equalizer: EqualizerKind,
    power: &PowerAllocation,
    link: &LinkConfig,
) -> Result<U0Reception> {
    if tx.grid() != channel.grid() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} grid", channel.grid().n(), channel.grid().m()),
            found: format!("{}x{} grid", tx.grid().n(), tx.grid().m()),
        });
    }
    let x = sfft(tx)?;
    let mut y = channel.apply(x.values());
    let sigma = std::f64::consts::FRAC_1_SQRT_2;
    for v in y.iter_mut() {
        *v += complex_gaussian(noise, sigma);
    }
    let y = Frame::new(*tx.grid(), y, Domain::DelayDoppler)?;

    let (estimates, eq) = match equalizer {
        EqualizerKind::Le => {
            let d = diagonalize(channel);
            (fd_le_equalize(&y, &d).ok(), Equalization::Linear(d))
        }
        EqualizerKind::Dfe => match cholesky_factors(channel) {
            Ok(f) => {
                let est = fd_dfe_equalize(&y, channel, &f, Feedback::Genie(x.values()))?;
                (Some(est), Equalization::DecisionFeedback(f))
            }
            Err(Error::SingularChannel(_)) => {
                let cells = channel.grid().cells();
                return Ok(U0Reception {
                    estimates: None,
                    sinrs: vec![0.0; cells],
                    outage: vec![true; cells],
                });
            }
            Err(e) => return Err(e),
        },
    };
    let sinrs = eq.sinrs(link.rho(), power);
    let eps = link.eps_u0();
    let outage = sinrs.iter().map(|&s| !(s > eps)).collect();
    Ok(U0Reception {
        estimates,
        sinrs,
        outage,
    })
}

/// Stage-I SINRs for decoding U₀'s symbols at a low-mobility user, one per
/// delay index l (identical across the Doppler index). A singular channel
/// gives all zeros.
pub fn noma_stage1(
    realization: &ChannelRealization,
    grid: &Grid,
    rho: f64,
    power: &PowerAllocation,
    equalizer: EqualizerKind,
) -> Result<Vec<f64>> {
    match equalizer {
        EqualizerKind::Le => {
            let d_tilde = nomauser_diagonalize(realization, grid)?;
            let sinr = superposed_sinr(mean_inverse_power(&d_tilde), rho, power);
            Ok(vec![sinr; grid.m()])
        }
        EqualizerKind::Dfe => match static_dfe_sinrs(realization, grid, rho, power) {
            Err(Error::SingularChannel(_)) => Ok(vec![0.0; grid.m()]),
            other => other,
        },
    }
}

/// Stage-II SNR ργ₁²|D̃^{i−1}|² for user `i` (1-based) on subchannel i−1.
pub fn noma_stage2(d_tilde: &[Complex64], rho: f64, gamma1_sq: f64, user: usize) -> Result<f64> {
    if user == 0 || user > d_tilde.len() {
        return Err(Error::invalid(format!(
            "user index {user} outside 1..={}",
            d_tilde.len()
        )));
    }
    Ok(rho * gamma1_sq * d_tilde[user - 1].norm_sqr())
}

/// Joint SIC outage: success needs the stage-II SNR above εᵢ and every
/// stage-I SINR above ε₀.
pub fn noma_outage(stage1: &[f64], stage2: f64, link: &LinkConfig) -> bool {
    let (eps0, epsi) = (link.eps_u0(), link.eps_noma());
    let success = stage2 > epsi && stage1.iter().all(|&s| s > eps0);
    !success
}

/// Whether an FD-LE user can ever succeed: γ₀² > γ₁²ε₀.
pub fn le_success_possible(power: &PowerAllocation, eps0: f64) -> bool {
    power.gamma0_sq() > power.gamma1_sq() * eps0
}

/// FD-LE SINR of U₀ for a full diagonalized channel; re-exported for callers
/// that already hold the diagonal values.
pub fn u0_le_sinr(
    d: &crate::transforms::DiagonalizedChannel,
    rho: f64,
    power: &PowerAllocation,
) -> f64 {
    fd_le_sinr(d, rho, power)
}
