//! Sequential design: variance screening, the ALC criterion, and the
//! acquire-label-refit loop.
//!
//! ALC ranks a candidate by the total posterior variance it would remove
//! at a fixed reference set if it were added to the training set. With
//! the current Cholesky factor `L` of the latent correlation matrix
//! `A = K + (ρ+j)I`, appending a candidate only needs the bordered factor
//!
//! ```text
//! L' = [ L   0 ]        l = L⁻¹ k_c,   λ² = (1 + ρ + j) − ‖l‖²
//!      [ lᵀ  λ ]
//! ```
//!
//! so each (candidate, reference) pair costs O(n) once the reference
//! solves `w_r = L⁻¹ k(z_r)` are in place for the round.

use crate::kernels;
use crate::lbfgs::{OptimConfig, StopTracker};
use crate::linalg::{BASE_JITTER, MAX_JITTER};
use crate::mgp::{self, EarlyStopOn, FittedMgp, MgpParams};
use crate::mlp::MlpArch;
use crate::{stage_seed, stages, AlmgpError, Dataset};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Alc,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Alc => "alc",
            Strategy::Random => "random",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = AlmgpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alc" => Ok(Strategy::Alc),
            "random" => Ok(Strategy::Random),
            other => Err(AlmgpError::Domain(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Convergence test applied after each refit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMetric {
    /// Mean squared error of the posterior mean on the training set.
    TrainMse,
    /// Relative change of the held-out RMSE across rounds.
    TestRmseChange,
    /// Run the full budget.
    Off,
}

/// Acquisition-loop settings. `budget` counts samples *added* on top of
/// the initial design, so the loop runs `budget / batch_size` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlConfig {
    /// Screen size: how many high-variance candidates enter ALC scoring.
    pub screen_size: usize,
    pub batch_size: usize,
    pub budget: usize,
    pub stop_metric: StopMetric,
    /// Tolerance for `stop_metric`; ignored when the metric is `Off`.
    pub tol: f64,
    /// Reuse the previous round's parameters as the refit start.
    pub warm_start: bool,
}

impl AlConfig {
    pub fn validate(&self) -> Result<(), AlmgpError> {
        if self.batch_size == 0 {
            return Err(AlmgpError::Domain("batch_size must be at least 1".into()));
        }
        if self.screen_size <= self.batch_size {
            return Err(AlmgpError::Domain(
                "screen_size must exceed batch_size".into(),
            ));
        }
        if self.budget < self.batch_size {
            return Err(AlmgpError::Domain(
                "budget must cover at least one batch".into(),
            ));
        }
        if !self.tol.is_finite() || self.tol < 0.0 {
            return Err(AlmgpError::Domain("stop tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Unlabelled candidate pool plus the reference set ALC integrates over.
/// Rows keep their original identity across removals so selection
/// histories stay meaningful.
#[derive(Debug, Clone)]
pub struct PoolState {
    candidates: DMatrix<f64>,
    ids: Vec<usize>,
    reference: DMatrix<f64>,
    history: Vec<(usize, Vec<usize>)>,
}

impl PoolState {
    pub fn new(candidates: DMatrix<f64>, reference: DMatrix<f64>) -> Result<Self, AlmgpError> {
        if candidates.nrows() == 0 {
            return Err(AlmgpError::EmptyInput("candidate pool"));
        }
        if reference.nrows() > 0 && reference.ncols() != candidates.ncols() {
            return Err(AlmgpError::ShapeMismatch {
                context: "pool reference dims",
                expected: candidates.ncols(),
                got: reference.ncols(),
            });
        }
        let ids = (0..candidates.nrows()).collect();
        Ok(Self {
            candidates,
            ids,
            reference,
            history: Vec::new(),
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.nrows()
    }

    pub fn candidates(&self) -> &DMatrix<f64> {
        &self.candidates
    }

    pub fn reference(&self) -> &DMatrix<f64> {
        &self.reference
    }

    /// Original row ids of the remaining candidates.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// `(round, original ids)` of every removal so far.
    pub fn history(&self) -> &[(usize, Vec<usize>)] {
        &self.history
    }

    /// Removes the rows at `positions` (current indices) and returns them
    /// in the given order.
    pub fn take(&mut self, round: usize, positions: &[usize]) -> Result<DMatrix<f64>, AlmgpError> {
        let n = self.candidates.nrows();
        let mut seen = vec![false; n];
        for &p in positions {
            if p >= n {
                return Err(AlmgpError::Domain(format!(
                    "candidate position {p} out of range (pool has {n})"
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(AlmgpError::Domain(format!(
                    "candidate position {p} selected twice"
                )));
            }
        }
        let taken = self.candidates.select_rows(positions.iter());
        self.history
            .push((round, positions.iter().map(|&p| self.ids[p]).collect()));
        let keep: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
        self.candidates = self.candidates.select_rows(keep.iter());
        self.ids = keep.iter().map(|&i| self.ids[i]).collect();
        Ok(taken)
    }
}

/// Positions of the top `k` candidates by posterior variance, highest
/// first; ties keep the lower position.
pub fn variance_screen(
    model: &FittedMgp,
    pool: &PoolState,
    k: usize,
) -> Result<Vec<usize>, AlmgpError> {
    let z = model.features_of(pool.candidates())?;
    screen_latent(model, &z, k)
}

fn screen_latent(
    model: &FittedMgp,
    z_cand: &DMatrix<f64>,
    k: usize,
) -> Result<Vec<usize>, AlmgpError> {
    let (_, var) = model.gp().predict_many(z_cand)?;
    let mut order: Vec<usize> = (0..z_cand.nrows()).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Per-round ALC state: reference solves against the current factor.
struct AlcScorer<'a> {
    model: &'a FittedMgp,
    z_ref: DMatrix<f64>,
    /// Column `r` holds `w_r = L⁻¹ k(z_r)`.
    w: DMatrix<f64>,
    /// `Σ_r ‖w_r‖²`, the candidate-independent part of the score.
    base: f64,
    /// Diagonal entry a new point contributes: `1 + ρ + j`.
    diag: f64,
}

impl<'a> AlcScorer<'a> {
    fn new(model: &'a FittedMgp, reference: &DMatrix<f64>) -> Result<Self, AlmgpError> {
        let gp = model.gp();
        let z_ref = model.features_of(reference)?;
        let n = gp.n();
        let m = z_ref.nrows();
        let mut w = DMatrix::zeros(n, m);
        let mut base = 0.0;
        for r in 0..m {
            let k_r = kernels::corr_vector(
                gp.kernel(),
                gp.features(),
                z_ref.row(r).into_owned().as_slice(),
            )?;
            let w_r = gp.factor().solve_lower(&k_r);
            base += w_r.norm_squared();
            w.set_column(r, &w_r);
        }
        Ok(Self {
            model,
            z_ref,
            w,
            base,
            diag: 1.0 + gp.rho() + gp.factor().jitter(),
        })
    }

    /// ALC score of one candidate given as a latent point.
    fn score_latent(&self, z_c: &[f64]) -> Result<f64, AlmgpError> {
        let gp = self.model.gp();
        let k_c = kernels::corr_vector(gp.kernel(), gp.features(), z_c)?;
        let l = gp.factor().solve_lower(&k_c);
        let mut lam2 = self.diag - l.norm_squared();
        if lam2 <= 0.0 {
            // bordered factor lost positivity; escalate jitter on the new
            // diagonal entry exactly as the full factorization would
            let mut extra = BASE_JITTER;
            while lam2 <= 0.0 && extra <= MAX_JITTER {
                lam2 = self.diag + extra - l.norm_squared();
                extra *= 10.0;
            }
            if lam2 <= 0.0 {
                return Err(AlmgpError::IllConditioned {
                    max_jitter: MAX_JITTER,
                });
            }
        }
        let lam = lam2.sqrt();
        let mut reductions = 0.0;
        for r in 0..self.z_ref.nrows() {
            let c_r = kernels::corr(
                gp.kernel(),
                z_c,
                self.z_ref.row(r).into_owned().as_slice(),
            )?;
            let u = (c_r - l.dot(&self.w.column(r).into_owned())) / lam;
            reductions += u * u;
        }
        Ok(gp.tau2() * (self.base + reductions))
    }
}

/// ALC score of a single candidate in the original input space:
/// `τ̂² Σ_r k'(z_r)ᵀ (K' + ρI)⁻¹ k'(z_r)` over the augmented model,
/// which equals the remaining total posterior variance reduction plus a
/// candidate-independent offset. Higher is better.
pub fn alc_score(
    model: &FittedMgp,
    x_new: &[f64],
    reference: &DMatrix<f64>,
) -> Result<f64, AlmgpError> {
    let scorer = AlcScorer::new(model, reference)?;
    let xm = DMatrix::from_row_slice(1, x_new.len(), x_new);
    let z = model.features_of(&xm)?;
    scorer.score_latent(z.row(0).into_owned().as_slice())
}

/// ALC selection for one round: screen the pool down to the
/// `screen_size` highest-variance candidates, score those, and return
/// the positions of the best `batch_size` (score descending, position
/// ascending on ties).
pub fn select_batch(
    model: &FittedMgp,
    pool: &PoolState,
    screen_size: usize,
    batch_size: usize,
) -> Result<Vec<usize>, AlmgpError> {
    if pool.n_candidates() == 0 {
        return Err(AlmgpError::EmptyInput("candidate pool"));
    }
    let z_cand = model.features_of(pool.candidates())?;
    let screened = screen_latent(model, &z_cand, screen_size.min(pool.n_candidates()))?;
    let scorer = AlcScorer::new(model, pool.reference())?;
    let mut scored = Vec::with_capacity(screened.len());
    for pos in screened {
        let s = scorer.score_latent(z_cand.row(pos).into_owned().as_slice())?;
        scored.push((pos, s));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(batch_size);
    Ok(scored.into_iter().map(|(pos, _)| pos).collect())
}

/// One row of the experiment log: the state after a round.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: usize,
    pub strategy: Strategy,
    /// Round number, starting at 1.
    pub iteration: usize,
    pub n_train: usize,
    /// Input rows labelled this round.
    pub chosen: Vec<Vec<f64>>,
    pub test_rmse: f64,
    pub wall_ms: u64,
}

/// Everything a single sequential run needs.
pub struct LoopInputs<'a> {
    pub arch: &'a MlpArch,
    pub init: MgpParams,
    pub train: Dataset,
    pub pool: PoolState,
    /// Held-out points with noise-free responses for RMSE reporting.
    pub test: &'a Dataset,
    pub strategy: Strategy,
    pub al: &'a AlConfig,
    pub opt: &'a OptimConfig,
    /// Track held-out RMSE inside the optimizer's early-stopping rule
    /// instead of the NLML itself.
    pub rmse_stop_in_optimizer: bool,
    pub run_id: usize,
    pub seed: u64,
}

/// A failed run still reports the rounds that completed.
#[derive(Debug)]
pub struct LoopAbort {
    pub error: AlmgpError,
    pub records: Vec<RunRecord>,
}

#[derive(Debug)]
pub struct LoopOutcome {
    pub model: FittedMgp,
    pub records: Vec<RunRecord>,
    pub pool: PoolState,
    /// Held-out RMSE of the initial fit, before any acquisition. The
    /// initial fit does not depend on the strategy, so it gets no row
    /// of its own in `records`.
    pub initial_rmse: f64,
}

/// Runs the sequential design loop: fit, then repeatedly select a batch,
/// label it through `oracle`, refit, and log, one record per round. Any
/// error mid-run aborts with the records gathered so far.
pub fn run_loop<F>(inputs: LoopInputs<'_>, mut oracle: F) -> Result<LoopOutcome, Box<LoopAbort>>
where
    F: FnMut(&[f64]) -> Result<f64, AlmgpError>,
{
    let LoopInputs {
        arch,
        init,
        mut train,
        mut pool,
        test,
        strategy,
        al,
        opt,
        rmse_stop_in_optimizer,
        run_id,
        seed,
    } = inputs;
    let mut records = Vec::new();
    let abort = |error: AlmgpError, records: Vec<RunRecord>| {
        Box::new(LoopAbort { error, records })
    };
    if let Err(e) = al.validate() {
        return Err(abort(e, records));
    }

    let fit_once = |start: &MgpParams, data: &Dataset| -> Result<FittedMgp, AlmgpError> {
        let stop = if rmse_stop_in_optimizer {
            EarlyStopOn::TestRmse(test)
        } else {
            EarlyStopOn::Objective
        };
        mgp::fit(arch, start, data, opt, stop)
    };

    let mut model = match fit_once(&init, &train) {
        Ok(m) => m,
        Err(e) => return Err(abort(e, records)),
    };
    let mut rmse = match model.test_rmse(test) {
        Ok(r) => r,
        Err(e) => return Err(abort(e, records)),
    };
    let initial_rmse = rmse;

    let mut acq_rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, stages::ACQUIRE));
    let mut cold_rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, stages::COLD_START));
    let mut rmse_tracker = StopTracker::new();
    rmse_tracker.update(rmse);

    let rounds = al.budget / al.batch_size;
    for round in 1..=rounds {
        if pool.n_candidates() == 0 {
            break;
        }
        let round_start = Instant::now();
        let want = al.batch_size.min(pool.n_candidates());
        let positions = match strategy {
            Strategy::Alc => match select_batch(&model, &pool, al.screen_size, want) {
                Ok(p) => p,
                Err(e) => return Err(abort(e, records)),
            },
            Strategy::Random => {
                let mut p = rand::seq::index::sample(&mut acq_rng, pool.n_candidates(), want)
                    .into_vec();
                p.sort_unstable();
                p
            }
        };
        let batch = match pool.take(round, &positions) {
            Ok(b) => b,
            Err(e) => return Err(abort(e, records)),
        };
        let mut chosen = Vec::with_capacity(batch.nrows());
        for i in 0..batch.nrows() {
            let row: Vec<f64> = batch.row(i).iter().copied().collect();
            let y = match oracle(&row) {
                Ok(y) => y,
                Err(e) => return Err(abort(e, records)),
            };
            if let Err(e) = train.push(&row, y) {
                return Err(abort(e, records));
            }
            chosen.push(row);
        }

        let start = if al.warm_start {
            model.params().clone()
        } else {
            MgpParams::init(arch, &mut cold_rng)
        };
        model = match fit_once(&start, &train) {
            Ok(m) => m,
            Err(e) => return Err(abort(e, records)),
        };
        rmse = match model.test_rmse(test) {
            Ok(r) => r,
            Err(e) => return Err(abort(e, records)),
        };
        records.push(RunRecord {
            run_id,
            strategy,
            iteration: round,
            n_train: train.len(),
            chosen,
            test_rmse: rmse,
            wall_ms: round_start.elapsed().as_millis() as u64,
        });

        let stop_now = match al.stop_metric {
            StopMetric::TrainMse => match model.train_mse() {
                Ok(mse) => mse < al.tol,
                Err(e) => return Err(abort(e, records)),
            },
            StopMetric::TestRmseChange => {
                rmse_tracker.update(rmse);
                rmse_tracker.should_stop(al.tol)
            }
            StopMetric::Off => false,
        };
        if stop_now {
            break;
        }
    }

    Ok(LoopOutcome {
        model,
        records,
        pool,
        initial_rmse,
    })
}
