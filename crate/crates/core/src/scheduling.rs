//! Picks which low-mobility users occupy the time-frequency subchannels.
//!
//! User indices are 0-based here; user `u` corresponds to the 1-based
//! NOMA user `u + 1` elsewhere. Ties go to the lowest index.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Random,
    Greedy,
    PerSubchannel,
}

/// Per-user channel power gains |D̃_u^m|² on each of the M subchannels.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPool {
    gains: Vec<Vec<f64>>,
    subchannels: usize,
}

impl UserPool {
    /// `gains[u][m]` is user u's power gain on subchannel m.
    pub fn new(gains: Vec<Vec<f64>>) -> Result<Self> {
        let subchannels = gains.first().map_or(0, Vec::len);
        if gains.is_empty() || subchannels == 0 {
            return Err(Error::invalid(
                "user pool needs at least one user and one subchannel",
            ));
        }
        if gains.iter().any(|g| g.len() != subchannels) {
            return Err(Error::invalid(
                "every user needs a gain for each subchannel",
            ));
        }
        if gains
            .iter()
            .flatten()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::invalid("gains must be finite and nonnegative"));
        }
        Ok(UserPool { gains, subchannels })
    }

    /// Builds the pool from each user's Doppler-free diagonal D̃_u.
    pub fn from_diagonals(diagonals: &[Vec<Complex64>]) -> Result<Self> {
        Self::new(
            diagonals
                .iter()
                .map(|d| d.iter().map(Complex64::norm_sqr).collect())
                .collect(),
        )
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    pub fn gains(&self, user: usize) -> &[f64] {
        &self.gains[user]
    }

    /// min_m |D̃_u^m|².
    pub fn min_gain(&self, user: usize) -> f64 {
        self.gains[user]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Draws M distinct users uniformly; entry m is the user on subchannel m.
pub fn random_schedule<R: Rng + ?Sized>(pool: &UserPool, rng: &mut R) -> Result<Vec<usize>> {
    let (k, m) = (pool.users(), pool.subchannels());
    if k < m {
        return Err(Error::invalid(format!(
            "random scheduling needs at least {m} users, pool has {k}"
        )));
    }
    Ok(sample(rng, k, m).into_vec())
}

/// The user with the strongest weakest subchannel; it takes every subchannel.
pub fn greedy_schedule(pool: &UserPool) -> usize {
    argmax((0..pool.users()).map(|u| pool.min_gain(u)))
}

/// Strongest user on each subchannel. One user may win several.
pub fn per_subchannel_schedule(pool: &UserPool) -> Vec<usize> {
    (0..pool.subchannels())
        .map(|m| argmax((0..pool.users()).map(|u| pool.gains[u][m])))
        .collect()
}

/// Runs the chosen policy and returns the user on each subchannel.
pub fn schedule<R: Rng + ?Sized>(
    kind: SchedulerKind,
    pool: &UserPool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    match kind {
        SchedulerKind::Random => random_schedule(pool, rng),
        SchedulerKind::Greedy => Ok(vec![greedy_schedule(pool); pool.subchannels()]),
        SchedulerKind::PerSubchannel => Ok(per_subchannel_schedule(pool)),
    }
}
