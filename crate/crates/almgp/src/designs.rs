//! Space-filling designs: Latin hypercube samples and uniform grids.
//!
//! The LHD uses the random-permutation construction: per dimension, a
//! shuffled assignment of points to strata plus a uniform jitter inside
//! each stratum. Exactly one point lands in each of the `n` equal-width
//! strata of every dimension, and output is fully determined by the seed.

use crate::AlmgpError;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Lhd,
    UniformGrid,
}

/// Description of a design to generate. `bounds` carries one `(lo, hi)`
/// pair per dimension; for grids `n_points` counts points per axis.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n_points: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl DesignSpec {
    pub fn dims(&self) -> usize {
        self.bounds.len()
    }
}

fn validate(n_points: usize, bounds: &[(f64, f64)]) -> Result<(), AlmgpError> {
    if n_points == 0 {
        return Err(AlmgpError::InvalidDesign("n_points must be positive".into()));
    }
    if bounds.is_empty() {
        return Err(AlmgpError::InvalidDesign("bounds must be non-empty".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(AlmgpError::InvalidDesign(format!(
                "degenerate bounds ({lo}, {hi})"
            )));
        }
    }
    Ok(())
}

pub fn generate(spec: &DesignSpec) -> Result<DMatrix<f64>, AlmgpError> {
    match spec.kind {
        DesignKind::Lhd => lhd_sample(spec.n_points, &spec.bounds, spec.seed),
        DesignKind::UniformGrid => uniform_grid(spec.n_points, &spec.bounds),
    }
}

/// Latin hypercube design with `n` rows over the given box.
pub fn lhd_sample(n: usize, bounds: &[(f64, f64)], seed: u64) -> Result<DMatrix<f64>, AlmgpError> {
    validate(n, bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = bounds.len();
    let mut out = DMatrix::zeros(n, dims);
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(&mut rng);
        let width = hi - lo;
        for (i, &k) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            out[(i, j)] = lo + width * ((k as f64 + u) / n as f64);
        }
    }
    Ok(out)
}

/// Uniform grid, endpoints inclusive: `n_per_axis` points per axis in one
/// dimension, the tensor product (`n_per_axis`² rows) in two. Higher
/// dimensions are not supported; use an LHD there instead.
pub fn uniform_grid(n_per_axis: usize, bounds: &[(f64, f64)]) -> Result<DMatrix<f64>, AlmgpError> {
    validate(n_per_axis, bounds)?;
    if bounds.len() > 2 {
        return Err(AlmgpError::InvalidDesign(format!(
            "uniform grid supports 1 or 2 dimensions, got {}",
            bounds.len()
        )));
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if n_per_axis == 1 {
            return vec![lo];
        }
        let step = (hi - lo) / (n_per_axis - 1) as f64;
        (0..n_per_axis).map(|i| lo + step * i as f64).collect()
    };
    match bounds {
        [b0] => {
            let xs = axis(*b0);
            Ok(DMatrix::from_fn(n_per_axis, 1, |i, _| xs[i]))
        }
        [b0, b1] => {
            let xs = axis(*b0);
            let ys = axis(*b1);
            let n = n_per_axis * n_per_axis;
            let mut out = DMatrix::zeros(n, 2);
            for (i, &x) in xs.iter().enumerate() {
                for (j, &y) in ys.iter().enumerate() {
                    let r = i * n_per_axis + j;
                    out[(r, 0)] = x;
                    out[(r, 1)] = y;
                }
            }
            Ok(out)
        }
        _ => unreachable!("validated above"),
    }
}
