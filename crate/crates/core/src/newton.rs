//! The squared smoothing Newton iteration shared by the OT and WB solvers.
//!
//! Each iteration solves the Newton system of `Ehat(eps, x, y) = 0` with the
//! `eps` row fixed to `d_eps = -eps + zeta * eps0`. Eliminating `d_x` leaves
//! the normal equation
//!
//! ```text
//! (lambda I + A Theta A^T) d_y = r_p - A G^{-1} r_c,
//! G = (1 + kappa_c eps) I - V2,   Theta = sigma G^{-1} V2,   lambda = kappa_p eps
//! ```
//!
//! whose solution is delegated to a problem-specific [`NormalSolver`].

use crate::model::{
    evaluate, kkt_metrics, unscale_solution, zeta, Evaluation, IterationLog, KktMetrics,
    LinearMethod, LpStructure, ModelError, SolveReport, SolverConfig, SparsePlan, Status,
};
use crate::smoothing::{deps_unchecked, dt_unchecked};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),
    #[error("no acceptable step within {0} backtracking trials")]
    LineSearchFail(usize),
}

/// `(eps, x, y)` on scaled data together with its smoothed-map evaluation.
#[derive(Debug, Clone)]
pub struct SmoothingIterate {
    eps: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: f64,
    ev: Evaluation,
}

impl SmoothingIterate {
    pub fn new<P: LpStructure + ?Sized>(
        problem: &P,
        config: &SolverConfig,
        eps: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self, SolverError> {
        if !(eps > 0.0) {
            return Err(SolverError::NonPositiveEps(eps));
        }
        if x.len() != problem.primal_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "primal vector",
                expected: problem.primal_dim(),
                found: x.len(),
            }
            .into());
        }
        if y.len() != problem.dual_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "dual vector",
                expected: problem.dual_dim(),
                found: y.len(),
            }
            .into());
        }
        Ok(Self::build(
            problem,
            config,
            config.sigma_for(problem),
            eps,
            x,
            y,
        ))
    }

    /// `(eps0, x0, 0)` with the problem's starting primal point.
    pub fn initial<P: LpStructure + ?Sized>(problem: &P, config: &SolverConfig) -> Self {
        let x = problem.initial_primal();
        let y = vec![0.0; problem.dual_dim()];
        Self::build(
            problem,
            config,
            config.sigma_for(problem),
            config.eps0,
            x,
            y,
        )
    }

    fn build<P: LpStructure + ?Sized>(
        problem: &P,
        config: &SolverConfig,
        sigma: f64,
        eps: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Self {
        let ev = evaluate(problem, config, sigma, eps, &x, &y);
        Self {
            eps,
            x,
            y,
            sigma,
            ev,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `phi = ||Ehat||^2`.
    pub fn merit(&self) -> f64 {
        self.ev.merit
    }

    pub fn ehat_norm(&self) -> f64 {
        self.ev.merit.sqrt()
    }

    /// `x + sigma (A^T y - c)`.
    pub fn smoothing_argument(&self) -> &[f64] {
        &self.ev.w
    }

    /// `E(eps, x, y)`: primal block followed by the complementarity block.
    pub fn residual(&self) -> Vec<f64> {
        let mut r = self.ev.primal.clone();
        r.extend_from_slice(&self.ev.comp);
        r
    }
}

/// Newton direction plus diagnostics of the reduced solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonDirection {
    pub d_eps: f64,
    pub d_x: Vec<f64>,
    pub d_y: Vec<f64>,
    pub zeta: f64,
    pub lin_iters: usize,
    pub lin_method: LinearMethod,
    /// Positive entries of `Theta`.
    pub nnz_v: usize,
    /// `||(lambda I + A Theta A^T) d_y - R||`.
    pub lin_residual: f64,
}

/// The reduced system `(lambda I + A Theta A^T) d_y = rhs`.
pub(crate) struct ReducedSystem<'a> {
    pub theta: &'a [f64],
    pub lambda: f64,
    pub rhs: &'a [f64],
    /// Absolute residual target for iterative solvers.
    pub inner_tol: f64,
}

pub(crate) struct NormalSolution {
    pub dy: Vec<f64>,
    pub iterations: usize,
    pub method: LinearMethod,
}

pub(crate) trait NormalSolver<P: ?Sized> {
    fn solve(&mut self, problem: &P, sys: &ReducedSystem) -> Result<NormalSolution, SolverError>;
}

pub(crate) fn newton_direction<P, S>(
    problem: &P,
    config: &SolverConfig,
    it: &SmoothingIterate,
    solver: &mut S,
) -> Result<NewtonDirection, SolverError>
where
    P: LpStructure + ?Sized,
    S: NormalSolver<P>,
{
    let eps = it.eps;
    let sigma = it.sigma;
    let z = zeta(config, it.ehat_norm());
    let d_eps = -eps + z * config.eps0;
    let kc = 1.0 + config.kappa_c * eps;
    let lambda = config.kappa_p * eps;

    let nx = it.x.len();
    let mut theta = vec![0.0; nx];
    // G^{-1} r_c, which is also the part of d_x independent of d_y.
    let mut rc_g = vec![0.0; nx];
    let mut nnz_v = 0;
    for i in 0..nx {
        let t = it.ev.w[i];
        let v2 = dt_unchecked(eps, t);
        let v1 = deps_unchecked(eps, t);
        let rc = -it.ev.comp[i] - (config.kappa_c * it.x[i] - v1) * d_eps;
        let g = kc - v2;
        rc_g[i] = rc / g;
        if v2 > 0.0 {
            theta[i] = sigma * v2 / g;
            nnz_v += 1;
        }
    }
    let mut rhs = problem.apply_a(&rc_g)?;
    for ((r, &p), &yi) in rhs.iter_mut().zip(&it.ev.primal).zip(&it.y) {
        *r = -p - config.kappa_p * yi * d_eps - *r;
    }
    let inner_tol = 1e-2 * 1f64.min(it.ehat_norm());
    let sol = solver.solve(
        problem,
        &ReducedSystem {
            theta: &theta,
            lambda,
            rhs: &rhs,
            inner_tol,
        },
    )?;
    let d_y = sol.dy;

    let at_dy = problem.apply_at(&d_y)?;
    let mut d_x = rc_g;
    let mut scaled = vec![0.0; nx];
    for i in 0..nx {
        let s = theta[i] * at_dy[i];
        d_x[i] += s;
        scaled[i] = s;
    }
    let mut lhs = problem.apply_a(&scaled)?;
    let mut res = 0.0;
    for i in 0..lhs.len() {
        lhs[i] += lambda * d_y[i] - rhs[i];
        res += lhs[i] * lhs[i];
    }
    Ok(NewtonDirection {
        d_eps,
        d_x,
        d_y,
        zeta: z,
        lin_iters: sol.iterations,
        lin_method: sol.method,
        nnz_v,
        lin_residual: res.sqrt(),
    })
}

/// Accepted step of the backtracking search.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    /// Number of merit evaluations, at least one.
    pub trials: usize,
    pub iterate: SmoothingIterate,
}

/// Finds the smallest `l <= max_linesearch` with
/// `phi(z + rho^l dz) <= (1 - 2 mu (1 - delta) rho^l) phi(z)`.
pub fn line_search<P: LpStructure + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    it: &SmoothingIterate,
    dir: &NewtonDirection,
) -> Result<LineSearchOutcome, SolverError> {
    let phi = it.merit();
    let slope = 2.0 * config.mu * (1.0 - config.delta());
    let mut step = 1.0;
    for l in 0..=config.max_linesearch {
        let eps = it.eps + step * dir.d_eps;
        if eps > 0.0 {
            let x: Vec<f64> =
                it.x.iter()
                    .zip(&dir.d_x)
                    .map(|(a, b)| a + step * b)
                    .collect();
            let y: Vec<f64> =
                it.y.iter()
                    .zip(&dir.d_y)
                    .map(|(a, b)| a + step * b)
                    .collect();
            let cand = SmoothingIterate::build(problem, config, it.sigma, eps, x, y);
            if cand.merit() <= (1.0 - slope * step) * phi {
                return Ok(LineSearchOutcome {
                    step,
                    trials: l + 1,
                    iterate: cand,
                });
            }
        }
        step *= config.rho;
    }
    Err(SolverError::LineSearchFail(config.max_linesearch + 1))
}

/// Unscaled primal and dual of an iterate.
pub fn unscaled<P: LpStructure + ?Sized>(
    problem: &P,
    it: &SmoothingIterate,
) -> (Vec<f64>, Vec<f64>) {
    unscale_solution(problem, &it.x, &it.y)
}

/// Runs the iteration to termination and packages the report. `finish`
/// extracts plans and barycenter weights from the unscaled primal.
pub(crate) fn run<P, S, F>(
    problem: &P,
    config: &SolverConfig,
    solver: &mut S,
    finish: F,
) -> Result<SolveReport, SolverError>
where
    P: LpStructure + ?Sized,
    S: NormalSolver<P>,
    F: FnOnce(&[f64]) -> (Vec<SparsePlan>, Option<Vec<f64>>),
{
    config.validate()?;
    let start = Instant::now();
    let mut it = SmoothingIterate::initial(problem, config);
    let mut log = Vec::new();
    let mut k = 0;
    let (status, metrics, x, y) = loop {
        let (x, y) = unscaled(problem, &it);
        let metrics: KktMetrics = kkt_metrics(problem, &x, &y)?;
        let stop = if metrics.max_residual() <= config.tol {
            Some(Status::Optimal)
        } else if it.eps < config.tol * 1e-2 {
            Some(Status::EpsFloor)
        } else if k >= config.max_iter {
            Some(Status::MaxIter)
        } else if start.elapsed().as_secs_f64() > config.time_limit_secs {
            Some(Status::TimeLimit)
        } else {
            None
        };
        if let Some(s) = stop {
            break (s, metrics, x, y);
        }
        let dir = match newton_direction(problem, config, &it, solver) {
            Ok(d) => d,
            Err(SolverError::LinearSolveFailed(_)) => {
                break (Status::LinearSolveFailed, metrics, x, y)
            }
            Err(e) => return Err(e),
        };
        let ls = match line_search(problem, config, &it, &dir) {
            Ok(ls) => ls,
            Err(SolverError::LineSearchFail(_)) => break (Status::LineSearchFail, metrics, x, y),
            Err(e) => return Err(e),
        };
        log.push(IterationLog {
            iter: k,
            merit: it.merit(),
            eps: it.eps,
            zeta: dir.zeta,
            step: ls.step,
            ls_trials: ls.trials,
            lin_iters: dir.lin_iters,
            lin_method: dir.lin_method,
            nnz_v: dir.nnz_v,
            lin_residual: dir.lin_residual,
            merit_after: ls.iterate.merit(),
        });
        it = ls.iterate;
        k += 1;
    };
    let (plans, barycenter) = finish(&x);
    let nnz_plan = plans.iter().map(SparsePlan::nnz).sum();
    Ok(SolveReport {
        status,
        iterations: k,
        eta_p: metrics.eta_p,
        eta_d: metrics.eta_d,
        eta_c: metrics.eta_c,
        eta_g: metrics.eta_g,
        objective_primal: metrics.primal_objective,
        objective_dual: metrics.dual_objective,
        plans,
        barycenter,
        nnz_plan,
        solve_seconds: start.elapsed().as_secs_f64(),
        log,
        primal: x,
        dual: y,
    })
}

/// Entries below this fraction of the average plan mass are dropped from
/// reported plans.
pub(crate) fn plan_threshold(config: &SolverConfig, mass: f64, entries: usize) -> f64 {
    1e-2 * config.tol * mass / entries.max(1) as f64
}
