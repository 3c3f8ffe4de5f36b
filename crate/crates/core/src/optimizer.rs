//! Projected gradient descent over column-stochastic matrices.
//!
//! Each restart starts from columns drawn uniformly on the simplex and
//! iterates `P ← Π(P − η∇T(P))`, where `Π` projects every column onto the
//! simplex. A step is accepted only if the projected point satisfies the
//! sufficient-decrease test `T(P⁺) ≤ T(P) − (c/η)‖P⁺ − P‖²_F`; otherwise `η`
//! is shrunk. The trial step of each iteration is the Barzilai–Borwein step
//! of the previous move when `spectral` is set, and the last accepted step
//! grown by `1/shrink` otherwise.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, GramMatrix};
use crate::objective::{evaluate_raw, ObjectiveContext};
use crate::rng::{self, StreamRng};
use crate::simplex::{project_columns_to_simplex, CdrMatrix};

/// Kernel bandwidth: fixed, or `2^b` times the median pairwise distance of
/// the training compositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma {
    Fixed(f64),
    Auto { b: f64 },
}

impl Sigma {
    pub fn resolve(&self, x: &DMatrix<f64>) -> Result<f64> {
        match *self {
            Sigma::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
            Sigma::Fixed(s) => Err(Error::NonPositiveBandwidth(s)),
            Sigma::Auto { b } => Ok(2f64.powf(b) * kernels::median_heuristic(x)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub m: usize,
    pub sigma: Sigma,
    pub epsilon: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub spectral: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            m: 2,
            sigma: Sigma::Auto { b: 0.0 },
            epsilon: 1e-3,
            restarts: 8,
            max_iters: 500,
            grad_tol: 1e-6,
            step_init: 1.0,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            spectral: true,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m < 1 || self.m > d {
            return bad(format!("target dimension m = {} must lie in 1..={d}", self.m));
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1".into());
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)".into());
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink must lie in (0, 1)".into());
        }
        if !(self.step_init > 0.0) || !(self.grad_tol >= 0.0) {
            return bad("step_init must be positive and grad_tol nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub p_hat: CdrMatrix,
    /// `T(P̂)` including the ε prefactor.
    pub objective: f64,
    /// Accepted objective values of the selected restart, starting at its
    /// initial point.
    pub trajectory: Vec<f64>,
    pub restart_index: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Final objective of every restart, by restart index.
    pub restart_objectives: Vec<f64>,
    pub sigma: f64,
    pub epsilon: f64,
}

impl FitResult {
    /// Fraction of entries of `P̂` below `threshold`.
    pub fn sparsity(&self, threshold: f64) -> f64 {
        let e = self.p_hat.entries();
        e.iter().filter(|&&v| v < threshold).count() as f64 / e.len() as f64
    }
}

/// `m × d` CDR matrix with independent flat-Dirichlet columns.
pub fn random_init<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Result<CdrMatrix> {
    if m == 0 || m > d {
        return Err(Error::InvalidConfig(format!("cannot initialize {m} × {d}")));
    }
    let mut entries = DMatrix::zeros(m, d);
    for j in 0..d {
        let draws: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        for (i, v) in draws.into_iter().enumerate() {
            entries[(i, j)] = v / total;
        }
    }
    CdrMatrix::new(entries)
}

/// Minimizes the trace objective for `n × d` compositions `x` and centered
/// response Gram matrix `g_y`.
pub fn fit_ckdr(x: &DMatrix<f64>, g_y: &GramMatrix, config: &FitConfig) -> Result<FitResult> {
    if x.nrows() < 2 {
        return Err(Error::TooFewSamples(format!("fitting needs n ≥ 2, got {}", x.nrows())));
    }
    let sigma = config.sigma.resolve(x)?;
    let ctx = ObjectiveContext::new(x.clone(), g_y.clone(), sigma, config.epsilon)?;
    fit_with_context(&ctx, config)
}

/// Fits real responses under the linear response kernel.
pub fn fit_ckdr_real(x: &DMatrix<f64>, y: &[f64], config: &FitConfig) -> Result<FitResult> {
    if x.nrows() < 2 {
        return Err(Error::TooFewSamples(format!("fitting needs n ≥ 2, got {}", x.nrows())));
    }
    let sigma = config.sigma.resolve(x)?;
    let ctx = ObjectiveContext::from_real_responses(x.clone(), y, sigma, config.epsilon)?;
    fit_with_context(&ctx, config)
}

/// Runs all restarts against a prepared context; the bandwidth and ridge
/// of the context take precedence over those in `config`.
pub fn fit_with_context(ctx: &ObjectiveContext, config: &FitConfig) -> Result<FitResult> {
    config.validate(ctx.d())?;
    if ctx.n() < 2 {
        return Err(Error::TooFewSamples(format!("fitting needs n ≥ 2, got {}", ctx.n())));
    }
    let runs: Vec<Result<RestartOutcome>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, rng::domain::RESTART, r as u64);
            run_restart(ctx, config, &mut rng)
        })
        .collect();
    let runs: Vec<RestartOutcome> = runs.into_iter().collect::<Result<_>>()?;

    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.objective < runs[best].objective {
            best = r;
        }
    }
    let restart_objectives = runs.iter().map(|r| r.objective).collect();
    let any_progress = runs.iter().any(|r| r.trajectory.len() > 1 || r.stationary);
    let chosen = runs.into_iter().nth(best).expect("at least one restart");
    Ok(FitResult {
        p_hat: chosen.p,
        objective: chosen.objective,
        trajectory: chosen.trajectory,
        restart_index: best,
        converged: chosen.converged && any_progress,
        iterations: chosen.iterations,
        restart_objectives,
        sigma: ctx.sigma(),
        epsilon: ctx.epsilon(),
    })
}

struct RestartOutcome {
    p: CdrMatrix,
    objective: f64,
    trajectory: Vec<f64>,
    converged: bool,
    stationary: bool,
    iterations: usize,
}

const MAX_BACKTRACKS: usize = 60;
const STEP_MIN: f64 = 1e-14;
const STEP_MAX: f64 = 1e14;

fn run_restart(ctx: &ObjectiveContext, config: &FitConfig, rng: &mut StreamRng) -> Result<RestartOutcome> {
    let mut p = random_init(config.m, ctx.d(), rng)?;
    let first = evaluate_raw(p.entries(), ctx, true)?;
    let mut value = first.value;
    let mut grad = first.gradient.expect("gradient requested");
    let mut trajectory = vec![value];
    let mut step = config.step_init;
    let mut previous: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut converged = false;
    let mut stationary = false;
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        iterations += 1;
        if config.spectral {
            if let Some((p_prev, g_prev)) = &previous {
                let s = p.entries() - p_prev;
                let yv = &grad - g_prev;
                let sy = s.dot(&yv);
                if sy > 0.0 {
                    step = (s.norm_squared() / sy).clamp(STEP_MIN, STEP_MAX);
                } else {
                    step = (step / config.armijo_shrink).min(STEP_MAX);
                }
            }
        }

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = project_columns_to_simplex(&(p.entries() - &grad * step))?;
            let moved = (trial.entries() - p.entries()).norm_squared();
            if moved == 0.0 {
                stationary = true;
                break;
            }
            match evaluate_raw(trial.entries(), ctx, true) {
                Ok(eval) if eval.value < value && eval.value <= value - config.armijo_c / step * moved => {
                    accepted = Some((trial, eval, moved.sqrt()));
                    break;
                }
                Ok(_) | Err(Error::SolveFailure(_)) => step *= config.armijo_shrink,
                Err(e) => return Err(e),
            }
            if step < STEP_MIN {
                break;
            }
        }

        let Some((trial, eval, moved)) = accepted else {
            // no descent along the projected path: stationary to working precision
            converged = true;
            stationary = true;
            break;
        };
        previous = Some((p.into_inner(), grad));
        p = trial;
        value = eval.value;
        grad = eval.gradient.expect("gradient requested");
        trajectory.push(value);
        if !config.spectral {
            step = (step / config.armijo_shrink).min(STEP_MAX);
        }
        if moved <= config.grad_tol {
            converged = true;
            break;
        }
    }

    Ok(RestartOutcome {
        p,
        objective: value,
        trajectory,
        converged,
        stationary,
        iterations,
    })
}
