//! Minimal dense linear algebra for the GP surrogates: row-major square
//! matrices, Cholesky factorization, and triangular solves.
//!
//! The Gram matrices here stay small (hundreds of points), so a plain
//! `Vec<f64>` with contiguous-row dot products is both simple and fast.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix of size {n} is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { n: usize, row: usize, pivot: f64 },
}

/// Lower-triangular Cholesky factor `L` of a symmetric positive definite
/// matrix, stored dense row-major.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

/// Factor a symmetric matrix given as a dense row-major `n × n` slice.
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &[f64], n: usize) -> Result<CholeskyFactor, LinalgError> {
    assert_eq!(a.len(), n * n);
    let mut l = a.to_vec();
    cholesky_in_place(&mut l, n)?;
    // zero the strict upper triangle left over from the input
    for i in 0..n {
        for j in i + 1..n {
            l[i * n + j] = 0.0;
        }
    }
    Ok(CholeskyFactor { n, l })
}

/// Like [`cholesky`] but reusing a caller-owned buffer, for hot loops that
/// factor once per objective evaluation. The strict upper triangle of the
/// factor holds leftovers from the input; none of the factor's operations
/// read it.
pub fn cholesky_reusing(
    a: &[f64],
    n: usize,
    mut buf: Vec<f64>,
) -> Result<CholeskyFactor, (LinalgError, Vec<f64>)> {
    assert_eq!(a.len(), n * n);
    buf.clear();
    buf.extend_from_slice(a);
    match cholesky_in_place(&mut buf, n) {
        Ok(()) => Ok(CholeskyFactor { n, l: buf }),
        Err(e) => Err((e, buf)),
    }
}

/// Blocked right-looking Cholesky, in place on the lower triangle. The
/// trailing update works on narrow column panels so the hot loop stays in
/// cache instead of re-streaming the whole matrix per row.
fn cholesky_in_place(l: &mut [f64], n: usize) -> Result<(), LinalgError> {
    const NB: usize = 48;
    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        // factor the diagonal block (dots run over this block's columns only)
        for i in k0..k0 + kb {
            for j in k0..=i {
                let s = dot(&l[i * n + k0..i * n + j], &l[j * n + k0..j * n + j]);
                let v = l[i * n + j] - s;
                if i == j {
                    if v <= 0.0 || !v.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { n, row: i, pivot: v });
                    }
                    l[i * n + j] = v.sqrt();
                } else {
                    l[i * n + j] = v / l[j * n + j];
                }
            }
        }
        // panel below the block
        for i in k0 + kb..n {
            for j in k0..k0 + kb {
                let s = dot(&l[i * n + k0..i * n + j], &l[j * n + k0..j * n + j]);
                l[i * n + j] = (l[i * n + j] - s) / l[j * n + j];
            }
        }
        // trailing update: A[i][j] -= <panel_i, panel_j>
        let mut panel_i = [0.0f64; NB];
        for i in k0 + kb..n {
            panel_i[..kb].copy_from_slice(&l[i * n + k0..i * n + k0 + kb]);
            for j in k0 + kb..=i {
                let s = dot(&panel_i[..kb], &l[j * n + k0..j * n + k0 + kb]);
                l[i * n + j] -= s;
            }
        }
        k0 += kb;
    }
    Ok(())
}

impl CholeskyFactor {
    pub fn size(&self) -> usize {
        self.n
    }

    /// ln |A| = 2 Σ ln L_ii for A = L Lᵀ.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Solve L x = b (forward substitution).
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    /// Solve Lᵀ x = b in place (swept by rows of L so memory access stays
    /// contiguous).
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        for j in (0..n).rev() {
            x[j] /= self.l[j * n + j];
            let xj = x[j];
            let row = &self.l[j * n..j * n + j];
            for (xi, lji) in x[..j].iter_mut().zip(row.iter()) {
                *xi -= lji * xj;
            }
        }
    }

    /// Solve Lᵀ x = b (backward substitution).
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_upper_in_place(&mut x);
        x
    }

    /// Solve (L Lᵀ) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve (L Lᵀ) x = b in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.solve_lower_in_place(x);
        self.solve_upper_in_place(x);
    }

    /// Row `i` of `L` (first `i + 1` entries are meaningful).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..(i + 1) * self.n]
    }

    /// Solve L x = b in place.
    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &x[..i]);
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
    }

    /// Reclaim the factor's backing buffer for reuse.
    pub fn into_buffer(self) -> Vec<f64> {
        self.l
    }
}

/// Dot product with eight independent accumulators so the FMA chain
/// pipelines and vectorizes. Fixed summation order keeps results
/// deterministic.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() - a.len() % 8;
    let mut acc = [0.0f64; 8];
    for (ca, cb) in a[..split].chunks_exact(8).zip(b[..split].chunks_exact(8)) {
        for lane in 0..8 {
            acc[lane] = ca[lane].mul_add(cb[lane], acc[lane]);
        }
    }
    let mut tail = 0.0;
    for (x, y) in a[split..].iter().zip(b[split..].iter()) {
        tail = x.mul_add(*y, tail);
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
