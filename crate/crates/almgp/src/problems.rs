//! The four benchmark problems: their response surfaces, default model
//! and loop settings, and seeded data generation.
//!
//! Each problem fixes a *model space* the surrogate works in. For the
//! first three it coincides with the natural input space; the borehole
//! function is modelled on the unit cube and mapped to its physical
//! ranges only when the response is evaluated, since the raw scales
//! (e.g. radii of influence up to 50000) saturate the feature map.

use crate::active::{AlConfig, PoolState, StopMetric};
use crate::designs;
use crate::lbfgs::OptimConfig;
use crate::mgp::MgpParams;
use crate::mlp::MlpArch;
use crate::{stage_seed, stages, AlmgpError, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemName {
    Trig1d,
    Synthetic2d,
    Sphere3d,
    Borehole8d,
}

impl ProblemName {
    pub const ALL: [ProblemName; 4] = [
        ProblemName::Trig1d,
        ProblemName::Synthetic2d,
        ProblemName::Sphere3d,
        ProblemName::Borehole8d,
    ];
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemName::Trig1d => "trig1d",
            ProblemName::Synthetic2d => "synthetic2d",
            ProblemName::Sphere3d => "sphere3d",
            ProblemName::Borehole8d => "borehole8d",
        })
    }
}

impl std::str::FromStr for ProblemName {
    type Err = AlmgpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trig1d" => Ok(ProblemName::Trig1d),
            "synthetic2d" => Ok(ProblemName::Synthetic2d),
            "sphere3d" => Ok(ProblemName::Sphere3d),
            "borehole8d" => Ok(ProblemName::Borehole8d),
            other => Err(AlmgpError::Domain(format!("unknown problem {other:?}"))),
        }
    }
}

/// A benchmark problem's default configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: ProblemName,
    pub input_dim: usize,
    pub arch: MlpArch,
    /// Standard deviation of observation noise added to labels.
    pub noise_sd: f64,
    pub n0: usize,
    pub test_size: usize,
    pub cand_size: usize,
    pub ref_size: usize,
    pub al: AlConfig,
    pub opt: OptimConfig,
    /// Track held-out RMSE for the optimizer's early stopping.
    pub rmse_stop_in_optimizer: bool,
}

impl Problem {
    pub fn get(name: ProblemName) -> Problem {
        match name {
            ProblemName::Trig1d => Problem {
                name,
                input_dim: 1,
                arch: MlpArch::new(vec![1, 6, 2]).expect("static arch"),
                noise_sd: 0.1,
                n0: 10,
                test_size: 500,
                cand_size: 100,
                ref_size: 100,
                al: AlConfig {
                    screen_size: 20,
                    batch_size: 1,
                    budget: 50,
                    stop_metric: StopMetric::TrainMse,
                    tol: 1e-5,
                    warm_start: true,
                },
                opt: OptimConfig {
                    history_size: 20,
                    learning_rate: 0.001,
                    max_iters_per_step: 20,
                    max_total_iters: 5000,
                    ..OptimConfig::default()
                },
                rmse_stop_in_optimizer: false,
            },
            ProblemName::Synthetic2d => Problem {
                name,
                input_dim: 2,
                arch: MlpArch::new(vec![2, 10, 3]).expect("static arch"),
                noise_sd: 0.0,
                n0: 50,
                test_size: 500,
                cand_size: 500,
                ref_size: 500,
                al: AlConfig {
                    screen_size: 50,
                    batch_size: 1,
                    budget: 50,
                    stop_metric: StopMetric::Off,
                    tol: 0.0,
                    warm_start: true,
                },
                opt: OptimConfig {
                    history_size: 50,
                    learning_rate: 0.01,
                    max_iters_per_step: 50,
                    max_total_iters: 5000,
                    ..OptimConfig::default()
                },
                rmse_stop_in_optimizer: false,
            },
            ProblemName::Sphere3d => Problem {
                name,
                input_dim: 3,
                arch: MlpArch::new(vec![3, 10, 2]).expect("static arch"),
                noise_sd: 0.0,
                n0: 50,
                test_size: 500,
                cand_size: 500,
                ref_size: 500,
                al: AlConfig {
                    screen_size: 50,
                    batch_size: 1,
                    budget: 100,
                    stop_metric: StopMetric::Off,
                    tol: 0.0,
                    warm_start: true,
                },
                opt: OptimConfig {
                    history_size: 50,
                    learning_rate: 0.01,
                    max_iters_per_step: 20,
                    max_total_iters: 5000,
                    ..OptimConfig::default()
                },
                rmse_stop_in_optimizer: false,
            },
            ProblemName::Borehole8d => Problem {
                name,
                input_dim: 8,
                arch: MlpArch::new(vec![8, 30, 4]).expect("static arch"),
                noise_sd: 0.0,
                n0: 50,
                test_size: 500,
                cand_size: 500,
                ref_size: 500,
                al: AlConfig {
                    screen_size: 50,
                    batch_size: 1,
                    budget: 150,
                    stop_metric: StopMetric::Off,
                    tol: 0.0,
                    warm_start: true,
                },
                opt: OptimConfig {
                    history_size: 50,
                    learning_rate: 0.001,
                    max_iters_per_step: 100,
                    max_total_iters: 10000,
                    early_stop_tol: 1e-8,
                    ..OptimConfig::default()
                },
                rmse_stop_in_optimizer: true,
            },
        }
    }
}

/// Piecewise trigonometric signal on `[0, 1]`: a fast cosine, a flat
/// plateau, then a slower cosine.
pub fn eval_trig1d(x: f64) -> Result<f64, AlmgpError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(AlmgpError::Domain(format!("trig1d input {x} outside [0, 1]")));
    }
    Ok(if x <= 0.33 {
        1.35 * (12.0 * PI * x).cos()
    } else if x <= 0.66 {
        1.35
    } else {
        1.35 * (6.0 * PI * x).cos()
    })
}

fn normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// The 2-D surface before rotation: two Gaussian-bump troughs in `x2`
/// plus a weak linear trend in `x1`.
pub fn synthetic2d_base(x1: f64, x2: f64) -> f64 {
    1.0 - normal_pdf(x2, 3.0, 0.5) - normal_pdf(x2, -3.0, 0.5) + x1 / 100.0
}

/// Rotates `p` by `angle` radians about `center`.
pub fn rotate_about(p: (f64, f64), center: (f64, f64), angle: f64) -> (f64, f64) {
    let (dx, dy) = (p.0 - center.0, p.1 - center.1);
    let (s, c) = angle.sin_cos();
    (center.0 + c * dx - s * dy, center.1 + s * dx + c * dy)
}

const SYNTH_CENTER: (f64, f64) = (5.0, 5.0);

/// The benchmark surface: the base function with its domain rotated 45°
/// about (5, 5). Defined for all finite inputs.
pub fn eval_synthetic2d(x1: f64, x2: f64) -> Result<f64, AlmgpError> {
    if !x1.is_finite() || !x2.is_finite() {
        return Err(AlmgpError::Domain("non-finite synthetic2d input".into()));
    }
    let (u, v) = rotate_about((x1, x2), SYNTH_CENTER, -PI / 4.0);
    Ok(synthetic2d_base(u, v))
}

/// Maps latitude-like `v ∈ [-1, 1]` and angle `α` to a point on the unit
/// sphere: `(√(1-v²) cos α, √(1-v²) sin α, v)`.
pub fn sphere_from_vh(v: f64, alpha: f64) -> [f64; 3] {
    let r = (1.0 - v * v).max(0.0).sqrt();
    [r * alpha.cos(), r * alpha.sin(), v]
}

/// Response observed on the sphere: `cos x + y² + eᶻ`.
pub fn eval_sphere3d(x: f64, y: f64, z: f64) -> Result<f64, AlmgpError> {
    if !x.is_finite() || !y.is_finite() || !z.is_finite() {
        return Err(AlmgpError::Domain("non-finite sphere3d input".into()));
    }
    Ok(x.cos() + y * y + z.exp())
}

/// Physical ranges of the borehole inputs, in the order
/// `(r_w, r, T_u, H_u, T_l, H_l, L, K_w)`.
pub const BOREHOLE_BOUNDS: [(f64, f64); 8] = [
    (0.05, 0.15),
    (100.0, 50_000.0),
    (63_070.0, 115_600.0),
    (990.0, 1_110.0),
    (63.1, 116.0),
    (700.0, 820.0),
    (1_120.0, 1_680.0),
    (9_855.0, 12_045.0),
];

/// Water flow rate through a borehole, without range validation.
pub fn borehole_formula(x: &[f64; 8]) -> f64 {
    let [rw, r, tu, hu, tl, hl, l, kw] = *x;
    let log_rrw = (r / rw).ln();
    let numer = 2.0 * PI * tu * (hu - hl);
    let denom = log_rrw * (1.0 + 2.0 * l * tu / (log_rrw * rw * rw * kw) + tu / tl);
    numer / denom
}

/// Water flow rate at a physical input, validating the standard ranges.
pub fn eval_borehole(x: &[f64]) -> Result<f64, AlmgpError> {
    if x.len() != 8 {
        return Err(AlmgpError::ShapeMismatch {
            context: "borehole input",
            expected: 8,
            got: x.len(),
        });
    }
    let mut phys = [0.0; 8];
    for (i, (&v, &(lo, hi))) in x.iter().zip(BOREHOLE_BOUNDS.iter()).enumerate() {
        if !(lo..=hi).contains(&v) {
            return Err(AlmgpError::Domain(format!(
                "borehole input {i} = {v} outside [{lo}, {hi}]"
            )));
        }
        phys[i] = v;
    }
    Ok(borehole_formula(&phys))
}

/// Expands unit-cube coordinates to the physical borehole ranges.
pub fn borehole_from_unit(u: &[f64]) -> Result<[f64; 8], AlmgpError> {
    if u.len() != 8 {
        return Err(AlmgpError::ShapeMismatch {
            context: "borehole unit input",
            expected: 8,
            got: u.len(),
        });
    }
    let mut phys = [0.0; 8];
    for (i, (&t, &(lo, hi))) in u.iter().zip(BOREHOLE_BOUNDS.iter()).enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(AlmgpError::Domain(format!(
                "borehole unit coordinate {i} = {t} outside [0, 1]"
            )));
        }
        phys[i] = lo + t * (hi - lo);
    }
    Ok(phys)
}

/// Noise-free response at a point of the problem's model space.
pub fn true_value(name: ProblemName, x: &[f64]) -> Result<f64, AlmgpError> {
    match name {
        ProblemName::Trig1d => {
            expect_dim(name, x, 1)?;
            eval_trig1d(x[0])
        }
        ProblemName::Synthetic2d => {
            expect_dim(name, x, 2)?;
            eval_synthetic2d(x[0], x[1])
        }
        ProblemName::Sphere3d => {
            expect_dim(name, x, 3)?;
            eval_sphere3d(x[0], x[1], x[2])
        }
        ProblemName::Borehole8d => {
            let phys = borehole_from_unit(x)?;
            Ok(borehole_formula(&phys))
        }
    }
}

fn expect_dim(name: ProblemName, x: &[f64], dim: usize) -> Result<(), AlmgpError> {
    if x.len() != dim {
        return Err(AlmgpError::ShapeMismatch {
            context: match name {
                ProblemName::Trig1d => "trig1d input",
                ProblemName::Synthetic2d => "synthetic2d input",
                ProblemName::Sphere3d => "sphere3d input",
                ProblemName::Borehole8d => "borehole input",
            },
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Initial design, candidate/reference pool, and held-out test set for
/// one repetition. Test responses are always noise-free.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub train: Dataset,
    pub pool: PoolState,
    pub test: Dataset,
}

fn label_matrix(name: ProblemName, x: &DMatrix<f64>) -> Result<DVector<f64>, AlmgpError> {
    let mut y = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        y[i] = true_value(name, x.row(i).into_owned().as_slice())?;
    }
    Ok(y)
}

/// Samples `(v, α)` by Latin hypercube and maps to the sphere.
fn sphere_design(n: usize, seed: u64) -> Result<DMatrix<f64>, AlmgpError> {
    let va = designs::lhd_sample(n, &[(-1.0, 1.0), (0.0, 2.0 * PI)], seed)?;
    let mut x = DMatrix::zeros(n, 3);
    for i in 0..n {
        let p = sphere_from_vh(va[(i, 0)], va[(i, 1)]);
        x[(i, 0)] = p[0];
        x[(i, 1)] = p[1];
        x[(i, 2)] = p[2];
    }
    Ok(x)
}

pub fn make_problem_data(p: &Problem, seed: u64) -> Result<ProblemData, AlmgpError> {
    let (train_x, cand, refs, test_x) = match p.name {
        ProblemName::Trig1d => {
            let b = [(0.0, 1.0)];
            (
                designs::lhd_sample(p.n0, &b, stage_seed(seed, stages::TRAIN_DESIGN))?,
                designs::uniform_grid(p.cand_size, &b)?,
                designs::uniform_grid(p.ref_size, &b)?,
                designs::uniform_grid(p.test_size, &b)?,
            )
        }
        ProblemName::Synthetic2d => {
            let b = [(0.0, 10.0), (0.0, 10.0)];
            (
                designs::lhd_sample(p.n0, &b, stage_seed(seed, stages::TRAIN_DESIGN))?,
                designs::lhd_sample(p.cand_size, &b, stage_seed(seed, stages::CANDIDATES))?,
                designs::lhd_sample(p.ref_size, &b, stage_seed(seed, stages::REFERENCES))?,
                designs::lhd_sample(p.test_size, &b, stage_seed(seed, stages::TEST))?,
            )
        }
        ProblemName::Sphere3d => (
            sphere_design(p.n0, stage_seed(seed, stages::TRAIN_DESIGN))?,
            sphere_design(p.cand_size, stage_seed(seed, stages::CANDIDATES))?,
            sphere_design(p.ref_size, stage_seed(seed, stages::REFERENCES))?,
            sphere_design(p.test_size, stage_seed(seed, stages::TEST))?,
        ),
        ProblemName::Borehole8d => {
            let b = [(0.0, 1.0); 8];
            (
                designs::lhd_sample(p.n0, &b, stage_seed(seed, stages::TRAIN_DESIGN))?,
                designs::lhd_sample(p.cand_size, &b, stage_seed(seed, stages::CANDIDATES))?,
                designs::lhd_sample(p.ref_size, &b, stage_seed(seed, stages::REFERENCES))?,
                designs::lhd_sample(p.test_size, &b, stage_seed(seed, stages::TEST))?,
            )
        }
    };

    let mut train_y = label_matrix(p.name, &train_x)?;
    if p.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, stages::TRAIN_NOISE));
        let noise = Normal::new(0.0, p.noise_sd)
            .map_err(|e| AlmgpError::Domain(format!("noise sd: {e}")))?;
        for v in train_y.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    let test_y = label_matrix(p.name, &test_x)?;

    Ok(ProblemData {
        train: Dataset::new(train_x, train_y)?,
        pool: PoolState::new(cand, refs)?,
        test: Dataset::new(test_x, test_y)?,
    })
}

/// Starting parameters for the run with this seed, drawn from the
/// dedicated initialization stage so they never correlate with the data.
pub fn make_init(p: &Problem, seed: u64) -> MgpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, stages::INIT));
    MgpParams::init(&p.arch, &mut rng)
}

/// Labelling oracle for the sequential loop: the true response plus the
/// problem's observation noise, drawn independently per query.
pub fn make_oracle(p: &Problem, seed: u64) -> impl FnMut(&[f64]) -> Result<f64, AlmgpError> {
    let name = p.name;
    let mut noise = if p.noise_sd > 0.0 {
        Some((
            ChaCha8Rng::seed_from_u64(stage_seed(seed, stages::ORACLE_NOISE)),
            Normal::new(0.0, p.noise_sd).expect("validated noise sd"),
        ))
    } else {
        None
    };
    move |x: &[f64]| {
        let mut y = true_value(name, x)?;
        if let Some((rng, dist)) = noise.as_mut() {
            y += dist.sample(rng);
        }
        Ok(y)
    }
}
