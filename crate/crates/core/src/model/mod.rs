//! Problem instances, the smoothed KKT map and its merit function, and the
//! relative KKT residues used for termination.
//!
//! Both problem classes are standard-form LPs `min <c, x> s.t. A x = d, x >= 0`
//! whose constraint matrix is never materialized: [`LpStructure`] exposes
//! `A x` and `A^T y` directly. The solver works on scaled data
//! `c / ||c||`, `d / ||d||`; a scaled pair `(x, y)` maps back to the
//! original data as `(||d|| x, ||c|| y)`.

mod ot;
mod report;
mod wb;

pub use ot::OtProblem;
pub use report::{IterationLog, LinearMethod, SolveReport, SparsePlan, Status};
pub use wb::WbProblem;

use crate::smoothing::huber_eval;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("{name} has a non-positive or non-finite entry at index {index}")]
    NonPositiveMass { name: &'static str, index: usize },
    #[error("{name} sums to {sum}, expected 1")]
    NotNormalized { name: &'static str, sum: f64 },
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("cost entry {0} is negative or non-finite")]
    InvalidCost(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Matrix-free access to a standard-form LP.
pub trait LpStructure: Sync {
    fn primal_dim(&self) -> usize;
    fn dual_dim(&self) -> usize;
    /// `out = A x`; slices must have the primal and dual dimensions.
    fn apply_a_into(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^T y`.
    fn apply_at_into(&self, y: &[f64], out: &mut [f64]);
    /// Original cost vector `c`.
    fn cost(&self) -> &[f64];
    /// Original right-hand side `d`.
    fn rhs(&self) -> &[f64];
    fn scaled_cost(&self) -> &[f64];
    fn scaled_rhs(&self) -> &[f64];
    /// `||c||` of the original cost (zero for an all-zero cost).
    fn cost_norm(&self) -> f64;
    /// Divisor applied to `c`; equals `||c||` unless that is zero.
    fn scale_c(&self) -> f64;
    /// Divisor applied to `d`.
    fn scale_d(&self) -> f64;
    /// Starting primal point in scaled coordinates.
    fn initial_primal(&self) -> Vec<f64>;

    fn apply_a(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.primal_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "primal vector",
                expected: self.primal_dim(),
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.dual_dim()];
        self.apply_a_into(x, &mut out);
        Ok(out)
    }

    fn apply_at(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if y.len() != self.dual_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "dual vector",
                expected: self.dual_dim(),
                found: y.len(),
            });
        }
        let mut out = vec![0.0; self.primal_dim()];
        self.apply_at_into(y, &mut out);
        Ok(out)
    }
}

/// How the reduced Newton system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    /// Direct for sparse systems, PCG otherwise (see the solver modules).
    #[default]
    Auto,
    Direct,
    Pcg,
}

/// Algorithmic constants of the smoothing Newton method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps0: f64,
    pub r: f64,
    pub tau: f64,
    pub rho: f64,
    pub mu: f64,
    /// `None` selects `min(1e3, ||c||)` from the original cost.
    pub sigma: Option<f64>,
    pub kappa_p: f64,
    pub kappa_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub time_limit_secs: f64,
    pub max_linesearch: usize,
    pub linear_solver: LinearSolverKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            r: 0.75,
            tau: 0.25,
            rho: 0.5,
            mu: 1e-8,
            sigma: None,
            kappa_p: 1.0,
            kappa_c: 1.0,
            tol: 1e-8,
            max_iter: 1000,
            time_limit_secs: 86_400.0,
            max_linesearch: 50,
            linear_solver: LinearSolverKind::Auto,
        }
    }
}

impl SolverConfig {
    /// `delta = r * eps0`, which must stay below one.
    pub fn delta(&self) -> f64 {
        self.r * self.eps0
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if !(self.eps0 > 0.0) {
            return bad("eps0 must be positive");
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return bad("r must lie in (0, 1)");
        }
        if !(self.delta() < 1.0) {
            return bad("r * eps0 must be below 1");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return bad("mu must lie in (0, 1/2)");
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return bad("sigma must be positive");
            }
        }
        if !(self.kappa_p > 0.0 && self.kappa_c > 0.0) {
            return bad("kappa_p and kappa_c must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.time_limit_secs > 0.0) {
            return bad("time limit must be positive");
        }
        Ok(())
    }

    /// The proximal weight `sigma` used for `problem`.
    pub fn sigma_for<P: LpStructure + ?Sized>(&self, problem: &P) -> f64 {
        match self.sigma {
            Some(s) => s,
            None => {
                let c = problem.cost_norm();
                if c > 0.0 {
                    c.min(1e3)
                } else {
                    1.0
                }
            }
        }
    }
}

/// Pieces of `E(eps, x, y)` on scaled data, cached per iterate.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    /// `x + sigma (A^T y - c)`.
    pub w: Vec<f64>,
    /// `A x + kappa_p eps y - d`.
    pub primal: Vec<f64>,
    /// `(1 + kappa_c eps) x - Phi(eps, w)`.
    pub comp: Vec<f64>,
    /// `eps^2 + ||primal||^2 + ||comp||^2`.
    pub merit: f64,
}

pub(crate) fn evaluate<P: LpStructure + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    sigma: f64,
    eps: f64,
    x: &[f64],
    y: &[f64],
) -> Evaluation {
    let mut ax = vec![0.0; problem.dual_dim()];
    let mut aty = vec![0.0; problem.primal_dim()];
    problem.apply_a_into(x, &mut ax);
    problem.apply_at_into(y, &mut aty);
    let d = problem.scaled_rhs();
    let c = problem.scaled_cost();
    let kp = config.kappa_p * eps;
    let primal: Vec<f64> = ax
        .iter()
        .zip(y)
        .zip(d)
        .map(|((&a, &yi), &di)| a + kp * yi - di)
        .collect();
    let kc = 1.0 + config.kappa_c * eps;
    let mut w = vec![0.0; x.len()];
    let mut comp = vec![0.0; x.len()];
    let mut sq = 0.0;
    for i in 0..x.len() {
        let wi = x[i] + sigma * (aty[i] - c[i]);
        w[i] = wi;
        let ci = kc * x[i] - huber_eval(eps, wi);
        comp[i] = ci;
        sq += ci * ci;
    }
    let merit = eps * eps + primal.iter().map(|v| v * v).sum::<f64>() + sq;
    Evaluation {
        w,
        primal,
        comp,
        merit,
    }
}

/// `E(eps, x, y) = (A x + kappa_p eps y - d ; (1 + kappa_c eps) x - Phi(eps, x + sigma (A^T y - c)))`
/// on the scaled data of `problem`.
pub fn smoothed_map<P: LpStructure + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    eps: f64,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>, ModelError> {
    check_dims(problem, x, y)?;
    let sigma = config.sigma_for(problem);
    let ev = evaluate(problem, config, sigma, eps, x, y);
    let mut out = ev.primal;
    out.extend_from_slice(&ev.comp);
    Ok(out)
}

/// `(ehat, phi)` with `ehat = (eps; E(eps, x, y))` and `phi = ||ehat||^2`.
pub fn ehat_and_merit<P: LpStructure + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    eps: f64,
    x: &[f64],
    y: &[f64],
) -> Result<(Vec<f64>, f64), ModelError> {
    check_dims(problem, x, y)?;
    let sigma = config.sigma_for(problem);
    let ev = evaluate(problem, config, sigma, eps, x, y);
    let mut ehat = Vec::with_capacity(1 + ev.primal.len() + ev.comp.len());
    ehat.push(eps);
    ehat.extend_from_slice(&ev.primal);
    ehat.extend_from_slice(&ev.comp);
    Ok((ehat, ev.merit))
}

/// `r * min(1, ||ehat||^(1 + tau))`.
pub fn zeta(config: &SolverConfig, ehat_norm: f64) -> f64 {
    config.r * 1f64.min(ehat_norm.powf(1.0 + config.tau))
}

fn check_dims<P: LpStructure + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
) -> Result<(), ModelError> {
    if x.len() != problem.primal_dim() {
        return Err(ModelError::DimensionMismatch {
            what: "primal vector",
            expected: problem.primal_dim(),
            found: x.len(),
        });
    }
    if y.len() != problem.dual_dim() {
        return Err(ModelError::DimensionMismatch {
            what: "dual vector",
            expected: problem.dual_dim(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Relative KKT residues on the original data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktMetrics {
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_g: f64,
    /// `<c, x>`.
    pub primal_objective: f64,
    /// `<d, y>`.
    pub dual_objective: f64,
}

impl KktMetrics {
    pub fn max_residual(&self) -> f64 {
        self.eta_p.max(self.eta_d).max(self.eta_c).max(self.eta_g)
    }
}

/// Residues at `(x, y)` in original coordinates with the dual slack
/// reconstructed as `z = c - A^T y`, which makes `eta_d` zero by
/// construction.
pub fn kkt_metrics<P: LpStructure + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
) -> Result<KktMetrics, ModelError> {
    check_dims(problem, x, y)?;
    let mut z = vec![0.0; problem.primal_dim()];
    problem.apply_at_into(y, &mut z);
    for (zi, &ci) in z.iter_mut().zip(problem.cost()) {
        *zi = ci - *zi;
    }
    let mut m = metrics_with_slack(problem, x, y, &z);
    m.eta_d = 0.0;
    Ok(m)
}

/// Residues at an explicit triple `(x, y, z)`.
pub fn kkt_metrics_with_slack<P: LpStructure + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> Result<KktMetrics, ModelError> {
    check_dims(problem, x, y)?;
    if z.len() != x.len() {
        return Err(ModelError::DimensionMismatch {
            what: "dual slack",
            expected: x.len(),
            found: z.len(),
        });
    }
    Ok(metrics_with_slack(problem, x, y, z))
}

fn metrics_with_slack<P: LpStructure + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> KktMetrics {
    let c = problem.cost();
    let d = problem.rhs();
    let mut ax = vec![0.0; problem.dual_dim()];
    problem.apply_a_into(x, &mut ax);
    let rp = ax
        .iter()
        .zip(d)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let eta_p = rp / (1.0 + norm2(d));

    let mut aty = vec![0.0; problem.primal_dim()];
    problem.apply_at_into(y, &mut aty);
    let rd = aty
        .iter()
        .zip(z)
        .zip(c)
        .map(|((a, zi), ci)| (a + zi - ci).powi(2))
        .sum::<f64>()
        .sqrt();
    let eta_d = rd / (1.0 + norm2(c));

    let rc = x
        .iter()
        .zip(z)
        .map(|(&xi, &zi)| (xi - (xi - zi).max(0.0)).powi(2))
        .sum::<f64>()
        .sqrt();
    let eta_c = rc / (1.0 + norm2(x) + norm2(z));

    let pobj: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
    let dobj: f64 = d.iter().zip(y).map(|(a, b)| a * b).sum();
    let eta_g = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    KktMetrics {
        eta_p,
        eta_d,
        eta_c,
        eta_g,
        primal_objective: pobj,
        dual_objective: dobj,
    }
}

/// Maps a scaled pair back to the original data: `(||d|| x, ||c|| y)`.
pub fn unscale_solution<P: LpStructure + ?Sized>(
    problem: &P,
    x_scaled: &[f64],
    y_scaled: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (sc, sd) = (problem.scale_c(), problem.scale_d());
    (
        x_scaled.iter().map(|v| v * sd).collect(),
        y_scaled.iter().map(|v| v * sc).collect(),
    )
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
