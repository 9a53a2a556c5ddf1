//! Frequency-domain linear (FD-LE) and decision-feedback (FD-DFE)
//! equalization of delay-Doppler observations, plus the per-symbol SINR
//! expressions that drive every outage computation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_channel::{ChannelRealization, Grid};
use crate::linalg::{reverse_ldl, reverse_ldl_trailing, CMatrix, PIVOT_THRESHOLD};
use crate::transforms::{
    build_block_circulant, BlockCirculantChannel, DiagonalizedChannel, Domain, Frame,
    SymplecticFft, SINGULAR_THRESHOLD,
};

/// Power split between the high-mobility user (γ₀²) and each NOMA user (γ₁²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    gamma0_sq: f64,
    gamma1_sq: f64,
}

impl PowerAllocation {
    /// Requires γ₀² + γ₁² = 1 with γ₀² > 0 and γ₁² ≥ 0. γ₁² = 0 is the OMA case.
    pub fn new(gamma0_sq: f64, gamma1_sq: f64) -> Result<Self> {
        if !(gamma0_sq > 0.0 && gamma0_sq <= 1.0) {
            return Err(Error::invalid(format!(
                "gamma0_sq must lie in (0, 1], got {gamma0_sq}"
            )));
        }
        if !(0.0..1.0).contains(&gamma1_sq) {
            return Err(Error::invalid(format!(
                "gamma1_sq must lie in [0, 1), got {gamma1_sq}"
            )));
        }
        if ((gamma0_sq + gamma1_sq) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "gamma0_sq + gamma1_sq must equal 1, got {}",
                gamma0_sq + gamma1_sq
            )));
        }
        Ok(PowerAllocation {
            gamma0_sq,
            gamma1_sq,
        })
    }

    /// All power to the high-mobility user.
    pub fn oma() -> Self {
        PowerAllocation {
            gamma0_sq: 1.0,
            gamma1_sq: 0.0,
        }
    }

    pub fn gamma0_sq(&self) -> f64 {
        self.gamma0_sq
    }

    pub fn gamma1_sq(&self) -> f64 {
        self.gamma1_sq
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0_sq.sqrt()
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1_sq.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualizerKind {
    Le,
    Dfe,
}

/// SINR ργ₀²/(ργ₁² + noise) shared by both equalizers; `noise` is φ for
/// FD-LE and 1/λ for FD-DFE. Returns 0 when the noise term is infinite.
#[inline]
pub fn superposed_sinr(noise: f64, rho: f64, power: &PowerAllocation) -> f64 {
    if !noise.is_finite() {
        return 0.0;
    }
    rho * power.gamma0_sq / (rho * power.gamma1_sq + noise)
}

/// FD-LE: transform to the time-frequency plane, divide by D^{k,l}, transform back.
pub fn fd_le_equalize(y: &Frame, d: &DiagonalizedChannel) -> Result<Frame> {
    fd_le_equalize_with(y, d, &SymplecticFft::new(y.grid()))
}

pub fn fd_le_equalize_with(
    y: &Frame,
    d: &DiagonalizedChannel,
    fft: &SymplecticFft,
) -> Result<Frame> {
    y.expect_domain(Domain::DelayDoppler)?;
    if y.grid() != d.grid() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} grid", d.grid().n(), d.grid().m()),
            found: format!("{}x{} grid", y.grid().n(), y.grid().m()),
        });
    }
    if d.is_singular() {
        return Err(Error::SingularChannel(format!(
            "a diagonal value has modulus at or below {SINGULAR_THRESHOLD:e}"
        )));
    }
    let mut buf = y.values().to_vec();
    fft.sfft_in_place(&mut buf);
    for (v, dv) in buf.iter_mut().zip(d.values()) {
        *v /= dv;
    }
    fft.isfft_in_place(&mut buf);
    Frame::new(*y.grid(), buf, Domain::DelayDoppler)
}

/// Common FD-LE SINR of every symbol: ργ₀² / (ργ₁² + (1/NM) Σ |D^{k,l}|⁻²).
/// A singular channel yields 0.
pub fn fd_le_sinr(d: &DiagonalizedChannel, rho: f64, power: &PowerAllocation) -> f64 {
    superposed_sinr(d.noise_enhancement(), rho, power)
}

/// `Hᴴ H = Lᴴ Λ L` for the FD-DFE.
#[derive(Debug, Clone)]
pub struct DfeFactors {
    l_factor: CMatrix,
    lambda: Vec<f64>,
}

impl DfeFactors {
    pub fn l_factor(&self) -> &CMatrix {
        &self.l_factor
    }

    /// λ_{kl} in row-major order.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
}

/// Factors the channel Gram matrix. The last pivot equals Σ_p |h_p|².
pub fn cholesky_factors(channel: &BlockCirculantChannel) -> Result<DfeFactors> {
    let (l_factor, lambda) = reverse_ldl(channel.gram()?)?;
    Ok(DfeFactors { l_factor, lambda })
}

/// Only the trailing `count` pivots of [`cholesky_factors`]; the elimination
/// runs from the last symbol backwards, so this stops early.
pub fn trailing_pivots(channel: &BlockCirculantChannel, count: usize) -> Result<Vec<f64>> {
    reverse_ldl_trailing(channel.gram()?, count)
}

/// Source of the past decisions fed back by the FD-DFE.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    /// Perfect decisions: the true transmitted superposition, row-major.
    Genie(&'a [Complex64]),
    /// Nearest-point slicing onto the given alphabet.
    HardDecision(&'a [Complex64]),
}

/// QPSK points with per-symbol energy `energy`.
pub fn qpsk(energy: f64) -> Vec<Complex64> {
    let a = (energy / 2.0).sqrt();
    vec![
        Complex64::new(a, a),
        Complex64::new(-a, a),
        Complex64::new(-a, -a),
        Complex64::new(a, -a),
    ]
}

/// FD-DFE: `x̂ = L (HᴴH)⁻¹ Hᴴ y − (L − I) x̌`.
///
/// Because `L` is unit lower triangular, symbol j only needs decisions on
/// symbols i < j; the sweep runs in row-major order starting at (0, 0).
/// The feed-forward output is computed as `Λ⁻¹ L⁻ᴴ Hᴴ y`.
pub fn fd_dfe_equalize(
    y: &Frame,
    channel: &BlockCirculantChannel,
    factors: &DfeFactors,
    feedback: Feedback<'_>,
) -> Result<Frame> {
    y.expect_domain(Domain::DelayDoppler)?;
    let cells = channel.grid().cells();
    if y.grid() != channel.grid() || factors.lambda.len() != cells {
        return Err(Error::ShapeMismatch {
            expected: format!("{cells} cells"),
            found: format!("{} cells", y.values().len()),
        });
    }
    if let Feedback::Genie(x) = feedback {
        if x.len() != cells {
            return Err(Error::ShapeMismatch {
                expected: format!("{cells} genie symbols"),
                found: format!("{}", x.len()),
            });
        }
    }
    if let Feedback::HardDecision(alphabet) = feedback {
        if alphabet.is_empty() {
            return Err(Error::invalid("hard-decision alphabet is empty"));
        }
    }
    if factors.lambda.iter().any(|&l| !(l > PIVOT_THRESHOLD)) {
        return Err(Error::SingularChannel(
            "DFE pivot at or below threshold".into(),
        ));
    }

    let l = &factors.l_factor;
    // Solve Lᴴ v = Hᴴ y by back substitution (Lᴴ is unit upper triangular).
    let mut v = channel.apply_adjoint(y.values());
    for i in (0..cells).rev() {
        let mut acc = v[i];
        for j in i + 1..cells {
            let lji = l[(j, i)];
            if lji != Complex64::new(0.0, 0.0) {
                acc -= lji.conj() * v[j];
            }
        }
        v[i] = acc;
    }
    let forward: Vec<Complex64> = v
        .iter()
        .zip(&factors.lambda)
        .map(|(vi, li)| vi / li)
        .collect();

    let mut estimates = vec![Complex64::new(0.0, 0.0); cells];
    let mut decisions = vec![Complex64::new(0.0, 0.0); cells];
    for j in 0..cells {
        let row = l.row(j);
        let mut est = forward[j];
        for (i, &lji) in row[..j].iter().enumerate() {
            if lji != Complex64::new(0.0, 0.0) {
                est -= lji * decisions[i];
            }
        }
        estimates[j] = est;
        decisions[j] = match feedback {
            Feedback::Genie(x) => x[j],
            Feedback::HardDecision(alphabet) => slice(est, alphabet),
        };
    }
    Frame::new(*y.grid(), estimates, Domain::DelayDoppler)
}

fn slice(v: Complex64, alphabet: &[Complex64]) -> Complex64 {
    *alphabet
        .iter()
        .min_by(|a, b| (v - **a).norm_sqr().total_cmp(&(v - **b).norm_sqr()))
        .expect("alphabet checked non-empty")
}

/// Per-symbol FD-DFE SINRs ργ₀²/(ργ₁² + 1/λ_{kl}).
pub fn fd_dfe_sinrs(factors: &DfeFactors, rho: f64, power: &PowerAllocation) -> Vec<f64> {
    dfe_sinrs_from_pivots(&factors.lambda, rho, power)
}

pub fn dfe_sinrs_from_pivots(lambda: &[f64], rho: f64, power: &PowerAllocation) -> Vec<f64> {
    lambda
        .iter()
        .map(|&l| {
            let noise = if l > PIVOT_THRESHOLD {
                1.0 / l
            } else {
                f64::INFINITY
            };
            superposed_sinr(noise, rho, power)
        })
        .collect()
}

/// The M×M circulant block `A_0` of a Doppler-free channel.
fn static_block(realization: &ChannelRealization, grid: &Grid) -> Result<CMatrix> {
    if !realization.profile().is_doppler_free() {
        return Err(Error::invalid(
            "low-mobility channel must have all Doppler taps at 0",
        ));
    }
    Ok(build_block_circulant(realization, grid)?.block(0))
}

/// Pivots λ̃_l of `A_0ᴴ A_0 = Lᴴ Λ̃ L` for a Doppler-free channel.
pub fn static_dfe_pivots(realization: &ChannelRealization, grid: &Grid) -> Result<Vec<f64>> {
    let a = static_block(realization, grid)?;
    let (_, lambda) = reverse_ldl(a.adjoint().matmul(&a))?;
    Ok(lambda)
}

/// M-point FD-DFE SINRs at a low-mobility user.
pub fn static_dfe_sinrs(
    realization: &ChannelRealization,
    grid: &Grid,
    rho: f64,
    power: &PowerAllocation,
) -> Result<Vec<f64>> {
    Ok(dfe_sinrs_from_pivots(
        &static_dfe_pivots(realization, grid)?,
        rho,
        power,
    ))
}

/// Channel-side state an equalizer needs to produce SINRs.
#[derive(Debug, Clone)]
pub enum Equalization {
    Linear(DiagonalizedChannel),
    DecisionFeedback(DfeFactors),
}

impl Equalization {
    /// Per-symbol SINRs, row-major.
    pub fn sinrs(&self, rho: f64, power: &PowerAllocation) -> Vec<f64> {
        match self {
            Equalization::Linear(d) => vec![fd_le_sinr(d, rho, power); d.grid().cells()],
            Equalization::DecisionFeedback(f) => fd_dfe_sinrs(f, rho, power),
        }
    }
}
