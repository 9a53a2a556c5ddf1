//! Time-frequency / delay-Doppler sampling grids and sparse channel models.
//!
//! A channel is described by integer delay and Doppler tap indices; the
//! fractional parts of the physical delays and Doppler shifts are taken to
//! be zero, so every path lands exactly on a grid point of the
//! delay-Doppler plane.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling description shared by the time-frequency and delay-Doppler planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_doppler: usize,
    m_delay: usize,
    symbol_duration: f64,
    subcarrier_spacing: f64,
}

impl Grid {
    pub fn new(
        n_doppler: usize,
        m_delay: usize,
        symbol_duration: f64,
        subcarrier_spacing: f64,
    ) -> Result<Self> {
        if n_doppler == 0 || m_delay == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got N={n_doppler}, M={m_delay}"
            )));
        }
        if !(symbol_duration > 0.0 && symbol_duration.is_finite()) {
            return Err(Error::invalid(format!(
                "symbol duration must be positive, got {symbol_duration}"
            )));
        }
        if !(subcarrier_spacing > 0.0 && subcarrier_spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing}"
            )));
        }
        Ok(Grid {
            n_doppler,
            m_delay,
            symbol_duration,
            subcarrier_spacing,
        })
    }

    /// Number of Doppler bins / OFDM symbols (N).
    pub fn n(&self) -> usize {
        self.n_doppler
    }

    /// Number of delay bins / subcarriers (M).
    pub fn m(&self) -> usize {
        self.m_delay
    }

    pub fn cells(&self) -> usize {
        self.n_doppler * self.m_delay
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    /// Frame duration N·T in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.n_doppler as f64 * self.symbol_duration
    }

    /// Occupied bandwidth M·Δf in hertz.
    pub fn bandwidth(&self) -> f64 {
        self.m_delay as f64 * self.subcarrier_spacing
    }

    /// Delay resolution 1/(M·Δf) in seconds.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    /// Doppler resolution 1/(N·T) in hertz.
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / self.frame_duration()
    }

    /// Row-major index `k·M + l` of delay-Doppler cell (k, l).
    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.m_delay + l
    }
}

/// Builds a grid with T = 1/Δf.
pub fn make_grid(n: usize, m: usize, delta_f: f64) -> Result<Grid> {
    if !(delta_f > 0.0 && delta_f.is_finite()) {
        return Err(Error::invalid(format!(
            "subcarrier spacing must be positive, got {delta_f}"
        )));
    }
    Grid::new(n, m, 1.0 / delta_f, delta_f)
}

/// One propagation path on the integer delay-Doppler lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tap {
    pub delay: usize,
    pub doppler: usize,
}

impl Tap {
    pub const fn new(delay: usize, doppler: usize) -> Self {
        Tap { delay, doppler }
    }
}

/// Delay-Doppler profile: the tap positions of the P+1 paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelProfile {
    paths: Vec<Tap>,
}

impl ChannelProfile {
    pub fn new(paths: Vec<Tap>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("channel profile needs at least one path"));
        }
        for (i, a) in paths.iter().enumerate() {
            if paths[..i].contains(a) {
                return Err(Error::invalid(format!(
                    "duplicate tap (delay {}, doppler {})",
                    a.delay, a.doppler
                )));
            }
        }
        Ok(ChannelProfile { paths })
    }

    pub fn paths(&self) -> &[Tap] {
        &self.paths
    }

    /// P+1.
    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn is_doppler_free(&self) -> bool {
        self.paths.iter().all(|t| t.doppler == 0)
    }

    pub fn max_delay_tap(&self) -> usize {
        self.paths.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    pub fn max_doppler_tap(&self) -> usize {
        self.paths.iter().map(|t| t.doppler).max().unwrap_or(0)
    }

    /// Checks that every tap lies inside the grid (delay < M, Doppler < N).
    pub fn check_fits(&self, grid: &Grid) -> Result<()> {
        for t in &self.paths {
            if t.delay >= grid.m() || t.doppler >= grid.n() {
                return Err(Error::invalid(format!(
                    "tap (delay {}, doppler {}) outside {}x{} grid",
                    t.delay,
                    t.doppler,
                    grid.n(),
                    grid.m()
                )));
            }
        }
        Ok(())
    }
}

/// Physical delays (µs) listed for the high-mobility profile. Documentation
/// only; the tap indices in [`vehicular_profile`] are authoritative.
pub const VEHICULAR_DELAYS_US: [f64; 4] = [8.33, 25.0, 41.67, 58.33];
/// Physical Doppler shifts (Hz) listed for the high-mobility profile.
pub const VEHICULAR_DOPPLERS_HZ: [f64; 4] = [0.0, 0.0, 468.8, 468.8];

/// The four-path high-mobility delay-Doppler profile used in the reference
/// scenarios: delay taps (2, 6, 10, 14), Doppler taps (0, 0, 1, 1).
pub fn vehicular_profile() -> ChannelProfile {
    ChannelProfile {
        paths: vec![
            Tap::new(2, 0),
            Tap::new(6, 0),
            Tap::new(10, 1),
            Tap::new(14, 1),
        ],
    }
}

/// Doppler-free profile for a low-mobility user.
pub fn static_profile(num_paths: usize, delay_taps: &[usize]) -> Result<ChannelProfile> {
    if num_paths == 0 {
        return Err(Error::invalid("static profile needs at least one path"));
    }
    if delay_taps.len() != num_paths {
        return Err(Error::invalid(format!(
            "expected {num_paths} delay taps, got {}",
            delay_taps.len()
        )));
    }
    ChannelProfile::new(delay_taps.iter().map(|&d| Tap::new(d, 0)).collect())
}

/// One random draw of the path gains for a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    profile: ChannelProfile,
    gains: Vec<Complex64>,
}

impl ChannelRealization {
    /// Builds a realization from explicit gains (used for crafted channels).
    pub fn from_gains(profile: ChannelProfile, gains: Vec<Complex64>) -> Result<Self> {
        if gains.len() != profile.num_paths() {
            return Err(Error::invalid(format!(
                "profile has {} paths but {} gains were given",
                profile.num_paths(),
                gains.len()
            )));
        }
        Ok(ChannelRealization { profile, gains })
    }

    pub fn profile(&self) -> &ChannelProfile {
        &self.profile
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    /// Iterates `(tap, gain)` pairs.
    pub fn paths(&self) -> impl Iterator<Item = (Tap, Complex64)> + '_ {
        self.profile
            .paths
            .iter()
            .copied()
            .zip(self.gains.iter().copied())
    }

    /// Σ_p |h_p|².
    pub fn total_power(&self) -> f64 {
        self.gains.iter().map(|g| g.norm_sqr()).sum()
    }
}

/// Draws i.i.d. CN(0, 1/(P+1)) gains for every path of `profile`.
pub fn sample_realization<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    rng: &mut R,
) -> ChannelRealization {
    let sigma = (0.5 / profile.num_paths() as f64).sqrt();
    let gains = (0..profile.num_paths())
        .map(|_| complex_gaussian(rng, sigma))
        .collect();
    ChannelRealization {
        profile: profile.clone(),
        gains,
    }
}

/// Circular complex Gaussian sample with per-component standard deviation `sigma`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}
