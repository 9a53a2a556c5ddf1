//! Diversity order as the log-log slope of an outage curve.

use super::csv::CurvePoint;
use crate::error::{Error, Result};

/// Upper edge of the reliable outage window.
pub const MAX_RELIABLE_OUTAGE: f64 = 0.1;

/// Least-squares slope of log10(P) against log10(ρ) = snr_db/10.
///
/// Only points with 10/trials ≤ P ≤ 0.1 are trusted, and of those only the
/// last decade of SNR (within 10 dB of the highest trusted point) is fitted,
/// since that is where the curve has reached its asymptotic slope. Needs at
/// least three such points.
pub fn diversity_slope(points: &[CurvePoint]) -> Result<f64> {
    let reliable: Vec<&CurvePoint> = points
        .iter()
        .filter(|p| {
            p.trials > 0 && p.value >= 10.0 / p.trials as f64 && p.value <= MAX_RELIABLE_OUTAGE
        })
        .collect();
    let top = reliable
        .iter()
        .map(|p| p.snr_db)
        .fold(f64::NEG_INFINITY, f64::max);
    let window: Vec<(f64, f64)> = reliable
        .iter()
        .filter(|p| p.snr_db >= top - 10.0)
        .map(|p| (p.snr_db / 10.0, p.value.log10()))
        .collect();
    if window.len() < 3 {
        return Err(Error::EstimatorUndefined(format!(
            "{} reliable points in the last decade, need at least 3",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let mx = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = window.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = window.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
