//! Analytic outage oracles used to validate Monte Carlo curves.

use crate::downlink::epsilon;
use crate::equalizers::PowerAllocation;
use crate::error::{Error, Result};

pub use crate::uplink::{closed_form_outage, error_floor, floor_approx};

/// P(Gamma(shape, 1) < x) for integer `shape` ≥ 1.
///
/// Small `x` sums the upper series e^{−x} Σ_{j≥shape} x^j/j! (no
/// cancellation); otherwise 1 − e^{−x} Σ_{j<shape} x^j/j!.
pub fn erlang_cdf(shape: u32, x: f64) -> f64 {
    assert!(shape >= 1, "Erlang shape must be at least 1");
    if !(x > 0.0) {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let k = shape as f64;
    if x < k {
        // Leading term x^k/k!, then ratios x/(j+1).
        let mut term = (k * x.ln() - x - ln_factorial(shape)).exp();
        let mut sum = 0.0;
        let mut j = k;
        while term > sum * 1e-17 {
            sum += term;
            j += 1.0;
            term *= x / j;
        }
        sum.min(1.0)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..shape {
            term *= x / j as f64;
            sum += term;
        }
        (1.0 - (-x).exp() * sum).max(0.0)
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// Outage of the last FD-DFE symbol x₀[N−1,M−1] over P₀+1 i.i.d. paths of
/// equal power: the SINR exceeds ε₀ iff Σ|h_p|² > ε₀/(ρ(γ₀² − γ₁²ε₀)), and
/// (P₀+1)Σ|h_p|² is Erlang(P₀+1). Returns 1 when γ₀² ≤ γ₁²ε₀.
pub fn corollary1_outage(
    p0: u32,
    rho: f64,
    gamma0_sq: f64,
    gamma1_sq: f64,
    rate_u0: f64,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if !(rate_u0 > 0.0) {
        return Err(Error::invalid(format!(
            "rate must be positive, got {rate_u0}"
        )));
    }
    let eps0 = epsilon(rate_u0);
    let margin = gamma0_sq - gamma1_sq * eps0;
    if margin <= 0.0 {
        return Ok(1.0);
    }
    let shape = p0 + 1;
    let x = eps0 * shape as f64 / (rho * margin);
    Ok(erlang_cdf(shape, x))
}

/// Lower and upper bounds on the FD-LE outage of U₀:
/// 1 − e^{−t/NM} ≤ P ≤ min(1, NM(1 − e^{−t})) with t = ε₀/(ρ(γ₀² − γ₁²ε₀)).
pub fn le_outage_bounds(cells: usize, rho: f64, power: &PowerAllocation, eps0: f64) -> (f64, f64) {
    let margin = power.gamma0_sq() - power.gamma1_sq() * eps0;
    if margin <= 0.0 {
        return (1.0, 1.0);
    }
    let t = eps0 / (rho * margin);
    let nm = cells as f64;
    let lower = -(-t / nm).exp_m1();
    let upper = (nm * -(-t).exp_m1()).min(1.0);
    (lower, upper)
}
