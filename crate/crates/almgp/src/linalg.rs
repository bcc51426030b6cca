//! Dense symmetric positive definite solves shared by the GP code.
//!
//! Everything routes through one Cholesky wrapper so the jitter policy is
//! applied uniformly: `BASE_JITTER` is always added to the diagonal, and on
//! factorization failure it escalates tenfold up to `MAX_JITTER` before the
//! matrix is declared ill-conditioned.

use crate::AlmgpError;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub const BASE_JITTER: f64 = 1e-8;
pub const MAX_JITTER: f64 = 1e-4;

/// Lower Cholesky factor of `A + jitter * I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl SpdFactor {
    /// Factors a symmetric matrix under the escalating jitter policy.
    pub fn new(a: &DMatrix<f64>) -> Result<Self, AlmgpError> {
        debug_assert_eq!(a.nrows(), a.ncols());
        let mut jitter = BASE_JITTER;
        loop {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::<f64, Dyn>::new(m) {
                return Ok(Self {
                    l: ch.unpack(),
                    jitter,
                });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * (1.0 + 1e-12) {
                return Err(AlmgpError::IllConditioned {
                    max_jitter: MAX_JITTER,
                });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// log det(A + jitter I) from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.nrows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves L v = b.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut v = b.clone();
        for i in 0..n {
            let mut s = v[i];
            for j in 0..i {
                s -= self.l[(i, j)] * v[j];
            }
            v[i] = s / self.l[(i, i)];
        }
        v
    }

    /// Solves Lᵀ w = b.
    pub fn solve_lower_t(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut w = b.clone();
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in (i + 1)..n {
                s -= self.l[(j, i)] * w[j];
            }
            w[i] = s / self.l[(i, i)];
        }
        w
    }

    /// Solves (A + jitter I) x = b through both triangular sweeps.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_lower_t(&self.solve_lower(b))
    }

    /// Dense inverse of (A + jitter I); used by likelihood gradients where
    /// the full matrix is contracted against per-entry kernel derivatives.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        // invert column by column; cost n^3, acceptable at the n <= 200
        // scales this library targets
        for j in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            let col = self.solve(&e);
            inv.set_column(j, &col);
        }
        // symmetrize to remove round-off skew
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        inv
    }
}
