//! Symplectic Fourier transforms and the delay-Doppler channel matrix.
//!
//! Both the ISFFT and the SFFT carry a 1/√(NM) factor, so the pair is
//! unitary and white noise stays white in either plane. Along the Doppler
//! axis the SFFT applies `e^{-j2πkn/N}`; along the delay axis it applies the
//! conjugate kernel `e^{+j2πml/M}`. Written as matrices acting on row-major
//! vectors, `sfft = F_N ⊗ F_Mᴴ` and `isfft = F_Nᴴ ⊗ F_M`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid_channel::{ChannelRealization, Grid, Tap};
use crate::linalg::CMatrix;

/// Largest N·M for which the dense channel matrix may be materialized.
pub const DENSE_LIMIT: usize = 4096;

/// |D| at or below this value makes the diagonalized channel singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    DelayDoppler,
    TimeFrequency,
}

/// N×M complex array tagged with the plane it lives in. Values are stored
/// row-major: entry (k, l) sits at `k·M + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    grid: Grid,
    values: Vec<Complex64>,
    domain: Domain,
}

impl Frame {
    pub fn new(grid: Grid, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} = {} values", grid.n(), grid.m(), grid.cells()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Frame {
            grid,
            values,
            domain,
        })
    }

    pub fn zeros(grid: Grid, domain: Domain) -> Self {
        Frame {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.cells()],
            domain,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.values[self.grid.index(k, l)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub(crate) fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainMismatch {
                expected,
                found: self.domain,
            });
        }
        Ok(())
    }
}

/// Planned FFTs for one grid size; reuse across frames on hot paths.
#[derive(Clone)]
pub struct SymplecticFft {
    n: usize,
    m: usize,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SymplecticFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymplecticFft")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl SymplecticFft {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        SymplecticFft {
            n: grid.n(),
            m: grid.m(),
            fwd_n: planner.plan_fft_forward(grid.n()),
            inv_n: planner.plan_fft_inverse(grid.n()),
            fwd_m: planner.plan_fft_forward(grid.m()),
            inv_m: planner.plan_fft_inverse(grid.m()),
        }
    }

    /// Delay-Doppler → time-frequency, in place on a row-major buffer.
    pub fn isfft_in_place(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inv_n, &self.fwd_m);
    }

    /// Time-frequency → delay-Doppler, in place on a row-major buffer.
    pub fn sfft_in_place(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.fwd_n, &self.inv_m);
    }

    /// Unnormalized 2-D transform with kernel `e^{-j2πkn/N} e^{+j2πml/M}`,
    /// i.e. √(NM) times the SFFT.
    pub(crate) fn sfft_unnormalized_in_place(&self, buf: &mut [Complex64]) {
        self.apply_axes(buf, &self.fwd_n, &self.inv_m);
    }

    fn transform(
        &self,
        buf: &mut [Complex64],
        along_n: &Arc<dyn Fft<f64>>,
        along_m: &Arc<dyn Fft<f64>>,
    ) {
        self.apply_axes(buf, along_n, along_m);
        let scale = 1.0 / ((self.n * self.m) as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn apply_axes(
        &self,
        buf: &mut [Complex64],
        along_n: &Arc<dyn Fft<f64>>,
        along_m: &Arc<dyn Fft<f64>>,
    ) {
        assert_eq!(buf.len(), self.n * self.m, "buffer does not match grid");
        let (n, m) = (self.n, self.m);
        if m > 1 {
            along_m.process(buf);
        }
        if n > 1 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for l in 0..m {
                for k in 0..n {
                    column[k] = buf[k * m + l];
                }
                along_n.process(&mut column);
                for k in 0..n {
                    buf[k * m + l] = column[k];
                }
            }
        }
    }
}

/// ISFFT: `X[n,m] = (1/√(NM)) Σ_k Σ_l x[k,l] e^{j2π(kn/N − ml/M)}`.
pub fn isfft(frame: &Frame) -> Result<Frame> {
    frame.expect_domain(Domain::DelayDoppler)?;
    let mut values = frame.values.clone();
    SymplecticFft::new(&frame.grid).isfft_in_place(&mut values);
    Ok(Frame {
        grid: frame.grid,
        values,
        domain: Domain::TimeFrequency,
    })
}

/// SFFT, the inverse of [`isfft`].
pub fn sfft(frame: &Frame) -> Result<Frame> {
    frame.expect_domain(Domain::TimeFrequency)?;
    let mut values = frame.values.clone();
    SymplecticFft::new(&frame.grid).sfft_in_place(&mut values);
    Ok(Frame {
        grid: frame.grid,
        values,
        domain: Domain::DelayDoppler,
    })
}

/// Block-circulant delay-Doppler channel matrix, kept as its sparse taps.
///
/// Path p moves input cell ((k − k_p) mod N, (l − l_p) mod M) to output
/// cell (k, l), so block (r, c) of the NM×NM matrix is `A_{(r−c) mod N}`
/// and every block is an M×M circulant.
#[derive(Debug, Clone)]
pub struct BlockCirculantChannel {
    grid: Grid,
    realization: ChannelRealization,
}

/// Validates that every tap fits the grid and wraps the realization.
pub fn build_block_circulant(
    realization: &ChannelRealization,
    grid: &Grid,
) -> Result<BlockCirculantChannel> {
    realization.profile().check_fits(grid)?;
    Ok(BlockCirculantChannel {
        grid: *grid,
        realization: realization.clone(),
    })
}

impl BlockCirculantChannel {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.realization
    }

    /// Output index reached from input `index` along `tap`.
    #[inline]
    fn shifted(&self, index: usize, tap: Tap) -> usize {
        let (n, m) = (self.grid.n(), self.grid.m());
        let (k, l) = (index / m, index % m);
        ((k + tap.doppler) % n) * m + (l + tap.delay) % m
    }

    /// y = H x.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.grid.cells());
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for (tap, h) in self.realization.paths() {
            for (i, &v) in x.iter().enumerate() {
                y[self.shifted(i, tap)] += h * v;
            }
        }
        y
    }

    /// u = Hᴴ y.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.grid.cells());
        let mut u = vec![Complex64::new(0.0, 0.0); y.len()];
        for (tap, h) in self.realization.paths() {
            let hc = h.conj();
            for (i, out) in u.iter_mut().enumerate() {
                *out += hc * y[self.shifted(i, tap)];
            }
        }
        u
    }

    /// The M×M circulant block `A_n`.
    pub fn block(&self, n: usize) -> CMatrix {
        let m = self.grid.m();
        let mut a = CMatrix::zeros(m, m);
        for (tap, h) in self.realization.paths() {
            if tap.doppler % self.grid.n() == n % self.grid.n() {
                for col in 0..m {
                    a[((col + tap.delay) % m, col)] += h;
                }
            }
        }
        a
    }

    /// Materializes the NM×NM matrix. Only allowed up to [`DENSE_LIMIT`] cells.
    pub fn to_dense(&self) -> Result<CMatrix> {
        let cells = self.grid.cells();
        if cells > DENSE_LIMIT {
            return Err(Error::invalid(format!(
                "refusing to materialize a {cells}x{cells} channel matrix (limit {DENSE_LIMIT})"
            )));
        }
        let mut h = CMatrix::zeros(cells, cells);
        for (tap, g) in self.realization.paths() {
            for col in 0..cells {
                h[(self.shifted(col, tap), col)] += g;
            }
        }
        Ok(h)
    }

    /// Hᴴ H built from the taps in O(NM·P²) without forming H.
    pub fn gram(&self) -> Result<CMatrix> {
        let cells = self.grid.cells();
        if cells > DENSE_LIMIT {
            return Err(Error::invalid(format!(
                "refusing to materialize a {cells}x{cells} Gram matrix (limit {DENSE_LIMIT})"
            )));
        }
        let paths: Vec<(Tap, Complex64)> = self.realization.paths().collect();
        // For each output row r, the columns feeding it: column c reaches
        // r along tap q when shifted(c, q) == r.
        let mut g = CMatrix::zeros(cells, cells);
        let (n, m) = (self.grid.n(), self.grid.m());
        for a in 0..cells {
            for &(tp, hp) in &paths {
                let r = self.shifted(a, tp);
                let (rk, rl) = (r / m, r % m);
                for &(tq, hq) in &paths {
                    let b = ((rk + n - tq.doppler % n) % n) * m + (rl + m - tq.delay % m) % m;
                    g[(a, b)] += hp.conj() * hq;
                }
            }
        }
        Ok(g)
    }
}

/// Eigenvalues D^{k,l} of the block-circulant channel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizedChannel {
    grid: Grid,
    d_values: Vec<Complex64>,
}

impl DiagonalizedChannel {
    pub fn from_values(grid: Grid, d_values: Vec<Complex64>) -> Result<Self> {
        if d_values.len() != grid.cells() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} diagonal values", grid.cells()),
                found: format!("{}", d_values.len()),
            });
        }
        Ok(DiagonalizedChannel { grid, d_values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.d_values
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.d_values[self.grid.index(k, l)]
    }

    pub fn is_singular(&self) -> bool {
        self.d_values.iter().any(|d| d.norm() <= SINGULAR_THRESHOLD)
    }

    /// (1/NM) Σ |D^{k,l}|⁻², the post-equalization noise enhancement.
    /// Infinite when the channel is singular.
    pub fn noise_enhancement(&self) -> f64 {
        mean_inverse_power(&self.d_values)
    }
}

/// Mean of |d|⁻² over `values`, or +∞ if any |d| is at or below the
/// singularity threshold.
pub(crate) fn mean_inverse_power(values: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for d in values {
        if d.norm() <= SINGULAR_THRESHOLD {
            return f64::INFINITY;
        }
        acc += 1.0 / d.norm_sqr();
    }
    acc / values.len() as f64
}

/// D^{k,l} = Σ_p h_p e^{j2π l l_p / M} e^{−j2π k k_p / N}, computed as
/// √(NM)·SFFT of the channel's first column laid out on the grid.
pub fn diagonalize(channel: &BlockCirculantChannel) -> DiagonalizedChannel {
    diagonalize_with(channel, &SymplecticFft::new(&channel.grid))
}

/// [`diagonalize`] with caller-provided FFT plans.
pub fn diagonalize_with(
    channel: &BlockCirculantChannel,
    fft: &SymplecticFft,
) -> DiagonalizedChannel {
    let grid = channel.grid;
    let mut column = vec![Complex64::new(0.0, 0.0); grid.cells()];
    for (tap, h) in channel.realization.paths() {
        column[grid.index(tap.doppler, tap.delay)] += h;
    }
    fft.sfft_unnormalized_in_place(&mut column);
    DiagonalizedChannel {
        grid,
        d_values: column,
    }
}

/// M diagonal values D̃^l = Σ_p h_p e^{j2π l l_p / M} of a Doppler-free
/// channel's circulant block `A_0`.
pub fn nomauser_diagonalize(
    realization: &ChannelRealization,
    grid: &Grid,
) -> Result<Vec<Complex64>> {
    if !realization.profile().is_doppler_free() {
        return Err(Error::invalid(
            "low-mobility channel must have all Doppler taps at 0",
        ));
    }
    realization.profile().check_fits(grid)?;
    let m = grid.m();
    let mut column = vec![Complex64::new(0.0, 0.0); m];
    for (tap, h) in realization.paths() {
        column[tap.delay] += h;
    }
    if m > 1 {
        FftPlanner::new().plan_fft_inverse(m).process(&mut column);
    }
    Ok(column)
}
