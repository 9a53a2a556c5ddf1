//! Small dense complex matrix support for the equalizers.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivots at or below this value mark a rank-deficient channel.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Factors a Hermitian positive-definite `a` as `Lᴴ Λ L` with `L` unit lower
/// triangular and `Λ` diagonal.
///
/// Pivots are eliminated from the last index backwards, so `Λ[n-1]` equals
/// `a[n-1][n-1]` and the leading pivot is `1 / (a⁻¹)[0][0]`. Exact zeros in
/// the working matrix are skipped, which keeps banded and block-sparse
/// Gram matrices cheap to factor.
pub fn reverse_ldl(a: CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let n = a.rows;
    let mut l = CMatrix::identity(n);
    let lambda = reverse_ldl_steps(a, n, Some(&mut l))?;
    Ok((l, lambda))
}

/// Runs only the first `count` elimination steps of [`reverse_ldl`] and
/// returns the trailing `count` pivots `Λ[n-count..n]`.
pub fn reverse_ldl_trailing(a: CMatrix, count: usize) -> Result<Vec<f64>> {
    let n = a.rows;
    let count = count.min(n);
    let lambda = reverse_ldl_steps(a, count, None)?;
    Ok(lambda[n - count..].to_vec())
}

fn reverse_ldl_steps(
    mut a: CMatrix,
    steps: usize,
    mut l: Option<&mut CMatrix>,
) -> Result<Vec<f64>> {
    let n = a.rows;
    assert_eq!(n, a.cols, "factorization needs a square matrix");
    let zero = Complex64::new(0.0, 0.0);
    let mut lambda = vec![0.0; n];
    let mut row = vec![zero; n];
    let mut nz = Vec::with_capacity(n);
    for j in (n - steps..n).rev() {
        let pivot = a[(j, j)].re;
        if !(pivot > PIVOT_THRESHOLD) {
            return Err(Error::SingularChannel(format!(
                "pivot {j} is {pivot:e}, at or below {PIVOT_THRESHOLD:e}"
            )));
        }
        lambda[j] = pivot;
        nz.clear();
        for i in 0..j {
            let v = a[(j, i)];
            if v != zero {
                row[i] = v / pivot;
                nz.push(i);
            }
        }
        if let Some(l) = l.as_deref_mut() {
            for &i in &nz {
                l[(j, i)] = row[i];
            }
        }
        for &r in &nz {
            let scale = row[r].conj() * pivot;
            let base = r * n;
            for &s in &nz {
                a.data[base + s] -= scale * row[s];
            }
        }
    }
    Ok(lambda)
}
