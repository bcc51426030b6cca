//! The manifold map `M`: a fully connected network with a logsigmoid
//! activation after every layer, the output layer included. Its image is
//! the feature space the GP operates on.
//!
//! Gradients are computed by hand (reverse accumulation through the
//! cached pre-activations); finite differences in the tests keep the
//! derivation honest.

use crate::AlmgpError;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Layer widths from input to output, e.g. `[8, 30, 4]` for an 8-D input
/// mapped through 30 hidden units onto a 4-D feature space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArch {
    sizes: Vec<usize>,
}

impl MlpArch {
    pub fn new(sizes: Vec<usize>) -> Result<Self, AlmgpError> {
        if sizes.len() < 2 {
            return Err(AlmgpError::InvalidDesign(
                "architecture needs at least input and output widths".into(),
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(AlmgpError::InvalidDesign("zero-width layer".into()));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// Network parameters; `weights[i]` has shape `sizes[i+1] × sizes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

impl MlpParams {
    /// Uniform `(-1/√fan_in, +1/√fan_in)` initialization for weights and
    /// biases alike.
    pub fn init<R: Rng>(arch: &MlpArch, rng: &mut R) -> Self {
        let mut weights = Vec::with_capacity(arch.n_layers());
        let mut biases = Vec::with_capacity(arch.n_layers());
        for w in arch.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut wm = DMatrix::zeros(fan_out, fan_in);
            // row-major draw order so the flattened layout matches init order
            for r in 0..fan_out {
                for c in 0..fan_in {
                    wm[(r, c)] = rng.random_range(-bound..bound);
                }
            }
            let bv = DVector::from_fn(fan_out, |_, _| rng.random_range(-bound..bound));
            weights.push(wm);
            biases.push(bv);
        }
        Self { weights, biases }
    }

    pub fn zeros(arch: &MlpArch) -> Self {
        Self {
            weights: arch
                .sizes
                .windows(2)
                .map(|w| DMatrix::zeros(w[1], w[0]))
                .collect(),
            biases: arch.sizes.windows(2).map(|w| DVector::zeros(w[1])).collect(),
        }
    }

    pub fn arch_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].ncols()];
        s.extend(self.weights.iter().map(|w| w.nrows()));
        s
    }

    /// Layer-by-layer flattening: weights row-major, then biases.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    out.push(w[(r, c)]);
                }
            }
            out.extend(b.iter());
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    pub fn unflatten(arch: &MlpArch, flat: &[f64]) -> Result<Self, AlmgpError> {
        if flat.len() < arch.param_count() {
            return Err(AlmgpError::ShapeMismatch {
                context: "mlp unflatten",
                expected: arch.param_count(),
                got: flat.len(),
            });
        }
        let mut weights = Vec::with_capacity(arch.n_layers());
        let mut biases = Vec::with_capacity(arch.n_layers());
        let mut k = 0;
        for w in arch.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut wm = DMatrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    wm[(r, c)] = flat[k];
                    k += 1;
                }
            }
            let bv = DVector::from_column_slice(&flat[k..k + fan_out]);
            k += fan_out;
            weights.push(wm);
            biases.push(bv);
        }
        Ok(Self { weights, biases })
    }
}

/// Numerically stable `log(1/(1+e^{-x}))`.
pub fn logsigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Derivative of [`logsigmoid`], i.e. `σ(-x)`.
pub fn logsigmoid_deriv(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Layer caches from a forward pass: pre-activations per layer plus the
/// activations feeding each layer, as needed for the backward sweep.
pub struct ForwardCache {
    /// `inputs[i]`: activations entering layer i (n × sizes[i]); inputs[0] is X.
    inputs: Vec<DMatrix<f64>>,
    /// `pre[i]`: pre-activations of layer i (n × sizes[i+1]).
    pre: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> DMatrix<f64> {
        let last = self.pre.last().expect("at least one layer");
        last.map(logsigmoid)
    }
}

fn check_input(params: &MlpParams, x: &DMatrix<f64>) -> Result<(), AlmgpError> {
    let expected = params.weights[0].ncols();
    if x.ncols() != expected {
        return Err(AlmgpError::ShapeMismatch {
            context: "mlp forward",
            expected,
            got: x.ncols(),
        });
    }
    Ok(())
}

/// Maps the rows of `x` (n × p) to feature space (n × Q), retaining the
/// intermediates required by [`backward`].
pub fn forward_cached(params: &MlpParams, x: &DMatrix<f64>) -> Result<ForwardCache, AlmgpError> {
    check_input(params, x)?;
    let n = x.nrows();
    let mut inputs = Vec::with_capacity(params.weights.len());
    let mut pre = Vec::with_capacity(params.weights.len());
    let mut z = x.clone();
    for (w, b) in params.weights.iter().zip(&params.biases) {
        let mut a = &z * w.transpose();
        for r in 0..n {
            for c in 0..w.nrows() {
                a[(r, c)] += b[c];
            }
        }
        inputs.push(z);
        z = a.map(logsigmoid);
        pre.push(a);
    }
    Ok(ForwardCache { inputs, pre })
}

/// Feature-space image of `x` without caching.
pub fn forward(params: &MlpParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>, AlmgpError> {
    Ok(forward_cached(params, x)?.output())
}

/// Reverse sweep: given `upstream = ∂L/∂(output)` (n × Q), accumulates
/// `∂L/∂(weights, biases)` in the same shapes as the parameters.
pub fn backward(params: &MlpParams, cache: &ForwardCache, upstream: &DMatrix<f64>) -> MlpParams {
    let layers = params.weights.len();
    let mut grad_w = vec![DMatrix::zeros(0, 0); layers];
    let mut grad_b = vec![DVector::zeros(0); layers];
    let mut up = upstream.clone();
    for i in (0..layers).rev() {
        // d/d(pre-activation): chain through the logsigmoid
        let delta = {
            let mut d = up.clone();
            let a = &cache.pre[i];
            for (dv, av) in d.iter_mut().zip(a.iter()) {
                *dv *= logsigmoid_deriv(*av);
            }
            d
        };
        grad_w[i] = delta.transpose() * &cache.inputs[i];
        grad_b[i] = DVector::from_fn(delta.ncols(), |c, _| delta.column(c).sum());
        if i > 0 {
            up = &delta * &params.weights[i];
        }
    }
    MlpParams {
        weights: grad_w,
        biases: grad_b,
    }
}
