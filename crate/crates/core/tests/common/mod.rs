//! Independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use otfs_noma::grid_channel::Grid;
use otfs_noma::linalg::CMatrix;

pub type Dense = DMatrix<Complex64>;

pub fn to_dense(m: &CMatrix) -> Dense {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

/// Unitary symplectic DFT written out entry by entry:
/// U[(k,l),(n,m)] = e^{−j2πkn/N} e^{+j2πml/M} / √(NM).
pub fn dense_sfft(grid: &Grid) -> Dense {
    let (n, m) = (grid.n(), grid.m());
    let scale = 1.0 / ((n * m) as f64).sqrt();
    DMatrix::from_fn(n * m, n * m, |row, col| {
        let (k, l) = (row / m, row % m);
        let (nn, mm) = (col / m, col % m);
        let phase = -2.0 * PI * (k * nn) as f64 / n as f64 + 2.0 * PI * (mm * l) as f64 / m as f64;
        Complex64::from_polar(scale, phase)
    })
}

pub fn max_abs(m: &Dense) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_off_diagonal(m: &Dense) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c {
                worst = worst.max(m[(r, c)].norm());
            }
        }
    }
    worst
}
