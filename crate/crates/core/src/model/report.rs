use serde::{Deserialize, Serialize};

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// The smoothing parameter fell below `tol * 1e-2` before the residues did.
    EpsFloor,
    MaxIter,
    TimeLimit,
    LineSearchFail,
    LinearSolveFailed,
}

/// How a reduced Newton system was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearMethod {
    /// `Theta = 0`; the system is `lambda I`.
    Diagonal,
    /// Cholesky per connected component of the bipartite support graph.
    Components,
    /// One sparse Cholesky of the whole system.
    Direct,
    Pcg,
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    /// Merit and smoothing parameter at the start of the iteration.
    pub merit: f64,
    pub eps: f64,
    pub zeta: f64,
    /// Accepted step length `rho^l`.
    pub step: f64,
    pub ls_trials: usize,
    pub lin_iters: usize,
    pub lin_method: LinearMethod,
    /// Number of positive entries of `v2`.
    pub nnz_v: usize,
    /// `||(lambda I + A Theta A^T) dy - R||` of the reduced system.
    pub lin_residual: f64,
    pub merit_after: f64,
}

/// Sparse `rows x cols` transport plan as `(i, j, value)` triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePlan {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparsePlan {
    /// Keeps entries of a column-major `rows x cols` array above `threshold`.
    pub fn from_col_major(rows: usize, cols: usize, data: &[f64], threshold: f64) -> Self {
        let mut entries = Vec::new();
        for j in 0..cols {
            for i in 0..rows {
                let v = data[j * rows + i];
                if v > threshold {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense_col_major(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for &(i, j, v) in &self.entries {
            d[j * self.rows + i] = v;
        }
        d
    }
}

/// Outcome of a solve, in original (unscaled) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    pub iterations: usize,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_g: f64,
    pub objective_primal: f64,
    pub objective_dual: f64,
    /// One plan for OT, one per input distribution for WB.
    pub plans: Vec<SparsePlan>,
    /// Barycenter weights `w` (WB only).
    pub barycenter: Option<Vec<f64>>,
    pub nnz_plan: usize,
    pub solve_seconds: f64,
    pub log: Vec<IterationLog>,
    /// Full primal and dual vectors.
    #[serde(skip)]
    pub primal: Vec<f64>,
    #[serde(skip)]
    pub dual: Vec<f64>,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.eta_p.max(self.eta_d).max(self.eta_c).max(self.eta_g)
    }
}
