//! Zero-mean GP regression on feature vectors.
//!
//! With correlation matrix `K` over the n training features, nugget ratio
//! `ρ = σ²/τ²` and process variance `τ²`, the negative log marginal
//! likelihood (constants dropped) is
//!
//! `Q = n·log τ² + log det(K + ρI) + yᵀ(K + ρI)⁻¹y / τ²`
//!
//! and the profiled variance estimate is `τ̂² = yᵀ(K + ρI)⁻¹y / n`.
//! Prediction at a feature vector z uses
//!
//! `mean = k(z)ᵀ(K + ρI)⁻¹y`
//! `var  = τ²·[1 − k(z)ᵀ(K + ρI)⁻¹k(z)] + ρτ²`
//!
//! where the bracketed term is clamped at zero if round-off drives it
//! negative (occurrences are counted on the state).
//!
//! All factorizations run through [`crate::linalg::SpdFactor`], so the
//! diagonal jitter policy is uniform across likelihood, prediction and
//! the gradient path.

use crate::kernels::{self, KernelFamily, KernelSpec};
use crate::linalg::SpdFactor;
use crate::AlmgpError;
use nalgebra::{DMatrix, DVector};
use std::sync::atomic::{AtomicUsize, Ordering};

fn check_gp_args(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    tau2: f64,
    rho: f64,
) -> Result<(), AlmgpError> {
    if features.nrows() == 0 {
        return Err(AlmgpError::EmptyInput("gp with no training points"));
    }
    if features.nrows() != y.len() {
        return Err(AlmgpError::ShapeMismatch {
            context: "gp features vs y",
            expected: features.nrows(),
            got: y.len(),
        });
    }
    if !(tau2 > 0.0) || !tau2.is_finite() {
        return Err(AlmgpError::Domain(format!("tau2 must be positive, got {tau2}")));
    }
    if rho < 0.0 || !rho.is_finite() {
        return Err(AlmgpError::Domain(format!("rho must be non-negative, got {rho}")));
    }
    Ok(())
}

fn corr_with_nugget(
    kernel: &KernelSpec,
    features: &DMatrix<f64>,
    rho: f64,
) -> Result<DMatrix<f64>, AlmgpError> {
    let mut a = kernels::corr_matrix(kernel, features)?;
    for i in 0..a.nrows() {
        a[(i, i)] += rho;
    }
    Ok(a)
}

/// Negative log marginal likelihood, Cholesky path.
pub fn nlml(
    kernel: &KernelSpec,
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    tau2: f64,
    rho: f64,
) -> Result<f64, AlmgpError> {
    check_gp_args(features, y, tau2, rho)?;
    let a = corr_with_nugget(kernel, features, rho)?;
    let factor = SpdFactor::new(&a)?;
    let alpha = factor.solve(y);
    let n = y.len() as f64;
    Ok(n * tau2.ln() + factor.log_det() + y.dot(&alpha) / tau2)
}

/// Closed-form maximizer of the likelihood in τ² with everything else
/// fixed. Returns 0 for an all-zero response, a degenerate value the
/// caller should treat as "no signal".
pub fn profile_tau2(
    kernel: &KernelSpec,
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    rho: f64,
) -> Result<f64, AlmgpError> {
    check_gp_args(features, y, 1.0, rho)?;
    let a = corr_with_nugget(kernel, features, rho)?;
    let factor = SpdFactor::new(&a)?;
    let alpha = factor.solve(y);
    Ok(y.dot(&alpha) / y.len() as f64)
}

/// Trained GP ready for prediction: kernel, training features, cached
/// Cholesky factor of `K + ρI` and the weight vector `(K + ρI)⁻¹y`.
#[derive(Debug)]
pub struct GpState {
    kernel: KernelSpec,
    features: DMatrix<f64>,
    y: DVector<f64>,
    tau2: f64,
    rho: f64,
    factor: SpdFactor,
    alpha: DVector<f64>,
    var_clamps: AtomicUsize,
}

impl Clone for GpState {
    fn clone(&self) -> Self {
        Self {
            kernel: self.kernel.clone(),
            features: self.features.clone(),
            y: self.y.clone(),
            tau2: self.tau2,
            rho: self.rho,
            factor: self.factor.clone(),
            alpha: self.alpha.clone(),
            var_clamps: AtomicUsize::new(self.var_clamps.load(Ordering::Relaxed)),
        }
    }
}

impl GpState {
    pub fn new(
        kernel: KernelSpec,
        features: DMatrix<f64>,
        y: DVector<f64>,
        tau2: f64,
        rho: f64,
    ) -> Result<Self, AlmgpError> {
        check_gp_args(&features, &y, tau2, rho)?;
        let a = corr_with_nugget(&kernel, &features, rho)?;
        let factor = SpdFactor::new(&a)?;
        let alpha = factor.solve(&y);
        Ok(Self {
            kernel,
            features,
            y,
            tau2,
            rho,
            factor,
            alpha,
            var_clamps: AtomicUsize::new(0),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Noise variance estimate σ̂² = ρ τ².
    pub fn noise_var(&self) -> f64 {
        self.rho * self.tau2
    }

    /// How often prediction clamped a negative variance to zero.
    pub fn var_clamp_count(&self) -> usize {
        self.var_clamps.load(Ordering::Relaxed)
    }

    /// Leave-one-out mean squared error of the posterior mean, in closed
    /// form: with C = K + ρI, dropping point i shifts its prediction by
    /// exactly αᵢ/[C⁻¹]ᵢᵢ, so all n residuals come out of the one factor
    /// already cached. The τ² scale cancels from the ratio.
    pub fn loo_mse(&self) -> f64 {
        let cinv = self.factor.inverse();
        let mut s = 0.0;
        for i in 0..self.n() {
            let e = self.alpha[i] / cinv[(i, i)];
            s += e * e;
        }
        s / self.n() as f64
    }

    /// Posterior mean and variance at one feature vector.
    pub fn predict(&self, z: &[f64]) -> Result<(f64, f64), AlmgpError> {
        let k = kernels::corr_vector(&self.kernel, &self.features, z)?;
        let mean = k.dot(&self.alpha);
        let v = self.factor.solve_lower(&k);
        let mut process_var = self.tau2 * (1.0 - v.norm_squared());
        if process_var < 0.0 {
            self.var_clamps.fetch_add(1, Ordering::Relaxed);
            process_var = 0.0;
        }
        Ok((mean, process_var + self.noise_var()))
    }

    /// Batched [`GpState::predict`] over the rows of `zq`.
    pub fn predict_many(&self, zq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>), AlmgpError> {
        let m = zq.nrows();
        let mut means = DVector::zeros(m);
        let mut vars = DVector::zeros(m);
        for r in 0..m {
            let row = zq.row(r).into_owned();
            let (mu, var) = self.predict(row.as_slice())?;
            means[r] = mu;
            vars[r] = var;
        }
        Ok((means, vars))
    }

    /// Means only; skips the triangular solve so it is O(n·q) per query.
    pub fn predict_mean_many(&self, zq: &DMatrix<f64>) -> Result<DVector<f64>, AlmgpError> {
        let m = zq.nrows();
        let mut means = DVector::zeros(m);
        for r in 0..m {
            let row = zq.row(r).into_owned();
            let k = kernels::corr_vector(&self.kernel, &self.features, row.as_slice())?;
            means[r] = k.dot(&self.alpha);
        }
        Ok(means)
    }
}

/// Raw (pre-squaring) GP hyperparameters as seen by the optimizer. The
/// effective values are the squares: θ_l = theta[l]², τ² = tau2², ρ = rho².
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperRaw {
    pub theta: Vec<f64>,
    pub tau2: f64,
    pub rho: f64,
}

impl GpHyperRaw {
    /// Floor keeps squared parameters strictly positive so logs and
    /// divisions stay finite when a raw value crosses zero exactly.
    pub const EFF_FLOOR: f64 = 1e-12;

    pub fn effective_theta(&self) -> Vec<f64> {
        self.theta.iter().map(|w| (w * w).max(Self::EFF_FLOOR)).collect()
    }

    pub fn effective_tau2(&self) -> f64 {
        (self.tau2 * self.tau2).max(Self::EFF_FLOOR)
    }

    pub fn effective_rho(&self) -> f64 {
        self.rho * self.rho
    }
}

/// Value and pieces of the NLML gradient at fixed features, with respect
/// to the *effective* parameters and the feature matrix itself.
pub(crate) struct NlmlGrad {
    pub value: f64,
    /// ∂Q/∂z, same shape as the feature matrix.
    pub d_features: DMatrix<f64>,
    /// ∂Q/∂θ_l (effective length scales).
    pub d_theta: DVector<f64>,
    pub d_tau2: f64,
    pub d_rho: f64,
}

/// Shared analytic gradient core. Restricted to the Gaussian family: the
/// benchmark models train only that kernel, and the Matérn closed forms
/// are kept value-only.
pub(crate) fn nlml_grad_full(
    kernel: &KernelSpec,
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    tau2: f64,
    rho: f64,
) -> Result<NlmlGrad, AlmgpError> {
    if kernel.family() != KernelFamily::Gaussian {
        return Err(AlmgpError::InvalidKernel(
            "analytic NLML gradients are implemented for the Gaussian kernel only".into(),
        ));
    }
    check_gp_args(features, y, tau2, rho)?;
    let n = features.nrows();
    let q = features.ncols();
    let theta = kernel.theta();

    let k = kernels::corr_matrix(kernel, features)?;
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += rho;
    }
    let factor = SpdFactor::new(&a)?;
    let alpha = factor.solve(y);
    let y_alpha = y.dot(&alpha);
    let value = n as f64 * tau2.ln() + factor.log_det() + y_alpha / tau2;

    let a_inv = factor.inverse();
    // G_ij = ∂Q/∂A_ij treating all n² entries as independent
    let g = &a_inv - &alpha * alpha.transpose() / tau2;

    let mut d_theta = DVector::zeros(q);
    let mut d_features = DMatrix::zeros(n, q);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let gk = g[(i, j)] * k[(i, j)];
            for l in 0..q {
                let d = features[(i, l)] - features[(j, l)];
                // contraction runs over all ordered pairs, so ∂K_ij/∂θ_l
                // and ∂K_ji/∂θ_l are both covered here
                d_theta[l] += gk * d * d / (theta[l] * theta[l]);
                d_features[(i, l)] += -2.0 * gk * d / theta[l];
            }
        }
    }
    // z_il enters K through row i and column i; the loop accumulated only
    // the row-side term, the column side doubles it
    d_features *= 2.0;

    let d_tau2 = n as f64 / tau2 - y_alpha / (tau2 * tau2);
    let d_rho = a_inv.trace() - alpha.norm_squared() / tau2;

    Ok(NlmlGrad {
        value,
        d_features,
        d_theta,
        d_tau2,
        d_rho,
    })
}

/// NLML value and gradient with respect to the raw hyperparameters
/// `[θ_raw…, τ²_raw, ρ_raw]` at fixed features, chaining through the
/// squared reparameterization.
pub fn nlml_grad_kernel_params(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    raw: &GpHyperRaw,
) -> Result<(f64, Vec<f64>), AlmgpError> {
    if raw.theta.len() != features.ncols() {
        return Err(AlmgpError::ShapeMismatch {
            context: "nlml_grad theta",
            expected: features.ncols(),
            got: raw.theta.len(),
        });
    }
    let kernel = KernelSpec::gaussian(raw.effective_theta())?;
    let parts = nlml_grad_full(&kernel, features, y, raw.effective_tau2(), raw.effective_rho())?;
    let mut grad = Vec::with_capacity(raw.theta.len() + 2);
    for (l, w) in raw.theta.iter().enumerate() {
        grad.push(parts.d_theta[l] * 2.0 * w);
    }
    grad.push(parts.d_tau2 * 2.0 * raw.tau2);
    grad.push(parts.d_rho * 2.0 * raw.rho);
    Ok((parts.value, grad))
}
