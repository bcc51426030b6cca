//! Separable correlation kernels over feature vectors.
//!
//! The Gaussian family is
//! `k(x, x') = exp{ -Σ_l (x_l - x'_l)² / θ_l }`,
//! one positive length scale per dimension. The Matérn family is the
//! per-dimension product with argument `t_l = 2√ν |x_l - x'_l| / θ_l`,
//! restricted to the half-integer orders that have closed forms:
//!
//! - ν = 1/2: `exp(-t)`
//! - ν = 3/2: `(1 + t) exp(-t)`
//! - ν = 5/2: `(1 + t + t²/3) exp(-t)`
//!
//! These are correlations, not covariances; the process variance τ² is
//! applied by the GP layer.

use crate::AlmgpError;
use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }
}

impl TryFrom<f64> for MaternNu {
    type Error = AlmgpError;

    fn try_from(nu: f64) -> Result<Self, AlmgpError> {
        if nu == 0.5 {
            Ok(MaternNu::Half)
        } else if nu == 1.5 {
            Ok(MaternNu::ThreeHalves)
        } else if nu == 2.5 {
            Ok(MaternNu::FiveHalves)
        } else {
            Err(AlmgpError::InvalidKernel(format!(
                "unsupported Matérn order {nu}; use 0.5, 1.5 or 2.5"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    Gaussian,
    Matern(MaternNu),
}

/// Validated kernel: family plus one strictly positive length scale per
/// feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    theta: DVector<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, theta: Vec<f64>) -> Result<Self, AlmgpError> {
        if theta.is_empty() {
            return Err(AlmgpError::InvalidKernel("empty length-scale vector".into()));
        }
        if theta.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(AlmgpError::InvalidKernel(format!(
                "length scales must be positive and finite, got {theta:?}"
            )));
        }
        Ok(Self {
            family,
            theta: DVector::from_vec(theta),
        })
    }

    pub fn gaussian(theta: Vec<f64>) -> Result<Self, AlmgpError> {
        Self::new(KernelFamily::Gaussian, theta)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn dims(&self) -> usize {
        self.theta.len()
    }

    fn check_dim(&self, got: usize, context: &'static str) -> Result<(), AlmgpError> {
        if got != self.dims() {
            return Err(AlmgpError::ShapeMismatch {
                context,
                expected: self.dims(),
                got,
            });
        }
        Ok(())
    }
}

fn corr_pair(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    match spec.family {
        KernelFamily::Gaussian => {
            let mut s = 0.0;
            for l in 0..a.len() {
                let d = a[l] - b[l];
                s += d * d / spec.theta[l];
            }
            (-s).exp()
        }
        KernelFamily::Matern(nu) => {
            let scale = 2.0 * nu.value().sqrt();
            let mut out = 1.0;
            for l in 0..a.len() {
                let t = scale * (a[l] - b[l]).abs() / spec.theta[l];
                out *= match nu {
                    MaternNu::Half => (-t).exp(),
                    MaternNu::ThreeHalves => (1.0 + t) * (-t).exp(),
                    MaternNu::FiveHalves => (1.0 + t + t * t / 3.0) * (-t).exp(),
                };
            }
            out
        }
    }
}

/// Correlation between two points.
pub fn corr(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64, AlmgpError> {
    spec.check_dim(x1.len(), "corr x1")?;
    spec.check_dim(x2.len(), "corr x2")?;
    Ok(corr_pair(spec, x1, x2))
}

/// Full correlation matrix of the rows of `x`. Symmetric with an exact
/// unit diagonal: only the strict lower triangle is computed and mirrored.
pub fn corr_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>, AlmgpError> {
    spec.check_dim(x.ncols(), "corr_matrix")?;
    let n = x.nrows();
    let mut k = DMatrix::identity(n, n);
    let rows: Vec<RowDVector<f64>> = (0..n).map(|i| x.row(i).into_owned()).collect();
    for i in 1..n {
        for j in 0..i {
            let v = corr_pair(spec, rows[i].as_slice(), rows[j].as_slice());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Correlations between each row of `x` and the single point `q`.
pub fn corr_vector(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    q: &[f64],
) -> Result<DVector<f64>, AlmgpError> {
    spec.check_dim(x.ncols(), "corr_vector x")?;
    spec.check_dim(q.len(), "corr_vector q")?;
    let n = x.nrows();
    let mut k = DVector::zeros(n);
    for i in 0..n {
        k[i] = corr_pair(spec, x.row(i).into_owned().as_slice(), q);
    }
    Ok(k)
}
