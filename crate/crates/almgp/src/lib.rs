//! Manifold Gaussian process (mGP) regression with active learning.
//!
//! The model composes a small feed-forward network `M` (the manifold map)
//! with a zero-mean Gaussian process `G` on the learned feature space, so
//! the regression function is `F = G ∘ M`. Both parts are trained jointly
//! by minimizing the negative log marginal likelihood with L-BFGS.
//! Sequential designs are grown with an Active Learning Cohn (ALC)
//! criterion evaluated through rank-one Cholesky updates.
//!
//! Module map:
//! - [`designs`]: Latin hypercube and uniform grid designs
//! - [`kernels`]: separable Gaussian and half-integer Matérn correlations
//! - [`gp`]: GP likelihood, profile variance, posterior prediction
//! - [`mlp`]: the feature map, a logsigmoid MLP with manual backprop
//! - [`mgp`]: joint model, likelihood gradients, fitting, checkpoints
//! - [`lbfgs`]: L-BFGS with strong Wolfe line search and early stopping
//! - [`active`]: variance screening, ALC scoring, the acquisition loop
//! - [`problems`]: the four benchmark problems and their data generators

pub mod active;
pub mod designs;
mod error;
pub mod gp;
pub mod kernels;
pub mod lbfgs;
pub mod linalg;
pub mod mgp;
pub mod mlp;
pub mod problems;

pub use error::AlmgpError;

use nalgebra::{DMatrix, DVector};

/// Inputs paired with responses; rows of `x` are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self, AlmgpError> {
        if x.nrows() != y.len() {
            return Err(AlmgpError::ShapeMismatch {
                context: "dataset",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Appends one labelled observation, checking the input dimension.
    pub fn push(&mut self, x: &[f64], y: f64) -> Result<(), AlmgpError> {
        if x.len() != self.x.ncols() {
            return Err(AlmgpError::ShapeMismatch {
                context: "dataset push",
                expected: self.x.ncols(),
                got: x.len(),
            });
        }
        let n = self.x.nrows();
        self.x = self.x.clone().insert_row(n, 0.0);
        for (j, v) in x.iter().enumerate() {
            self.x[(n, j)] = *v;
        }
        self.y = self.y.clone().insert_row(n, y);
        Ok(())
    }
}

/// Stage labels for [`stage_seed`]. Every random decision in an
/// experiment draws from its own sub-stream so that, for example, the
/// random-sampling baseline and the ALC run of the same repetition see
/// identical training data and identical initial parameters.
pub mod stages {
    pub const TRAIN_DESIGN: u64 = 1;
    pub const TRAIN_NOISE: u64 = 2;
    pub const TEST: u64 = 3;
    pub const CANDIDATES: u64 = 4;
    pub const REFERENCES: u64 = 5;
    pub const INIT: u64 = 6;
    pub const ACQUIRE: u64 = 7;
    pub const COLD_START: u64 = 8;
    pub const ORACLE_NOISE: u64 = 9;
}

/// Derives a named sub-stream seed so independent random stages
/// (designs, noise, initialization, acquisition) never share state.
pub fn stage_seed(run_seed: u64, stage: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = run_seed ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root mean squared error between predictions and targets.
pub fn rmse(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<f64, AlmgpError> {
    if pred.len() != truth.len() {
        return Err(AlmgpError::ShapeMismatch {
            context: "rmse",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(AlmgpError::EmptyInput("rmse over zero points"));
    }
    let sq = (pred - truth).norm_squared() / pred.len() as f64;
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rmse_identical_is_zero() {
        let a = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn rmse_single_point_is_absolute_error() {
        let p = DVector::from_vec(vec![3.0]);
        let t = DVector::from_vec(vec![1.0]);
        assert_eq!(rmse(&p, &t).unwrap(), 2.0);
    }

    #[test]
    fn rmse_hand_value() {
        // predictions (1,2) against (0,0): sqrt((1+4)/2) = sqrt(5/2)
        let p = DVector::from_vec(vec![1.0, 2.0]);
        let t = DVector::from_vec(vec![0.0, 0.0]);
        assert_relative_eq!(rmse(&p, &t).unwrap(), 1.5811388300841898, epsilon = 1e-12);
    }

    #[test]
    fn rmse_rejects_length_mismatch() {
        let p = DVector::from_vec(vec![1.0]);
        let t = DVector::from_vec(vec![0.0, 0.0]);
        assert!(rmse(&p, &t).is_err());
    }

    #[test]
    fn stage_seeds_are_distinct() {
        let s: Vec<u64> = (0..8).map(|k| stage_seed(42, k)).collect();
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn dataset_push_grows_and_checks_dim() {
        let mut d = Dataset::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 3.0]),
            DVector::from_vec(vec![5.0, 6.0]),
        )
        .unwrap();
        d.push(&[4.0, 5.0], 7.0).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.x[(2, 1)], 5.0);
        assert_eq!(d.y[2], 7.0);
        assert!(d.push(&[1.0], 0.0).is_err());
    }
}
