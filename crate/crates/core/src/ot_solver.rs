//! Smoothing Newton solver for discrete optimal transport.
//!
//! For OT the normal matrix has the block form
//!
//! ```text
//! lambda I + [ Diag(V e_n)   V             ]
//!            [ V^T           Diag(V^T e_m) ]
//! ```
//!
//! with `V = mat(theta)`. Flipping the sign of the column block turns it into
//! `lambda I` plus the Laplacian of the bipartite graph of `V > 0`, so the
//! system splits along the connected components of that graph. Near the
//! solution `V` has few positive entries and most components are tiny.

use crate::linalg::{
    connected_components_from_edges, incomplete_cholesky, pcg, sparse_cholesky_mmatrix,
    ComponentLabels, LinalgError, Preconditioner, SparseSymMatrix,
};
use crate::model::{
    LinearMethod, LinearSolverKind, OtProblem, SolveReport, SolverConfig, SparsePlan,
};
use crate::newton::{
    newton_direction, plan_threshold, run, NewtonDirection, NormalSolution, NormalSolver,
    ReducedSystem, SmoothingIterate, SolverError,
};

pub use crate::newton::line_search;

/// Normal matrix of one Newton step for an OT instance.
#[derive(Debug, Clone)]
pub struct NormalSystemOT {
    m: usize,
    n: usize,
    kept: usize,
    lambda: f64,
    /// `theta = sigma v`, column-major `m x n`.
    theta: Vec<f64>,
    components: ComponentLabels,
    nnz_v: usize,
}

/// Builds `lambda I + A Theta A^T` with `Theta = sigma V2 ((1 + kappa_c eps) I - V2)^{-1}`
/// and `lambda = kappa_p eps`.
pub fn assemble_normal_ot(
    problem: &OtProblem,
    config: &SolverConfig,
    eps: f64,
    v2: &[f64],
) -> Result<NormalSystemOT, SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::NonPositiveEps(eps));
    }
    let sigma = config.sigma_for(problem);
    let g = 1.0 + config.kappa_c * eps;
    let theta: Vec<f64> = v2
        .iter()
        .map(|&v| if v > 0.0 { sigma * v / (g - v) } else { 0.0 })
        .collect();
    Ok(NormalSystemOT::new(problem, config.kappa_p * eps, theta))
}

impl NormalSystemOT {
    pub(crate) fn new(problem: &OtProblem, lambda: f64, theta: Vec<f64>) -> Self {
        let (m, n, kept) = (problem.m(), problem.n(), problem.kept_cols());
        let edges = theta
            .iter()
            .enumerate()
            .filter(|&(k, &t)| t > 0.0 && k / m < kept)
            .map(|(k, _)| (k % m, k / m));
        let components = connected_components_from_edges(m, kept, edges);
        let nnz_v = theta.iter().filter(|&&t| t > 0.0).count();
        Self {
            m,
            n,
            kept,
            lambda,
            theta,
            components,
            nnz_v,
        }
    }

    pub fn dim(&self) -> usize {
        self.m + self.kept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Theta` reshaped column-major to `m x n`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn components(&self) -> &ComponentLabels {
        &self.components
    }

    /// Positive entries of `V`, including those in a dropped column.
    pub fn nnz_v(&self) -> usize {
        self.nnz_v
    }

    /// Diagonal of the normal matrix.
    fn diagonal(&self) -> Vec<f64> {
        let m = self.m;
        let mut d = vec![self.lambda; self.dim()];
        for j in 0..self.n {
            for i in 0..m {
                let t = self.theta[j * m + i];
                if t > 0.0 {
                    d[i] += t;
                    if j < self.kept {
                        d[m + j] += t;
                    }
                }
            }
        }
        d
    }

    /// The normal matrix itself (column block not sign-flipped).
    pub fn matrix(&self) -> SparseSymMatrix {
        self.build(1.0)
    }

    /// `J M J` with `J = diag(I_m, -I_kept)`: an M-matrix.
    fn flipped(&self) -> SparseSymMatrix {
        self.build(-1.0)
    }

    fn build(&self, sign: f64) -> SparseSymMatrix {
        let m = self.m;
        let dim = self.dim();
        let diag = self.diagonal();
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx = Vec::with_capacity(dim + self.nnz_v);
        let mut values = Vec::with_capacity(dim + self.nnz_v);
        col_ptr.push(0);
        for i in 0..m {
            row_idx.push(i);
            values.push(diag[i]);
            for j in 0..self.kept {
                let t = self.theta[j * m + i];
                if t > 0.0 {
                    row_idx.push(m + j);
                    values.push(sign * t);
                }
            }
            col_ptr.push(row_idx.len());
        }
        for j in 0..self.kept {
            row_idx.push(m + j);
            values.push(diag[m + j]);
            col_ptr.push(row_idx.len());
        }
        SparseSymMatrix::from_sorted_parts(dim, col_ptr, row_idx, values)
    }

    /// `lambda` plus the weight of edges into the dropped column, per node.
    fn excess(&self) -> Vec<f64> {
        let m = self.m;
        let mut e = vec![self.lambda; self.dim()];
        if self.kept < self.n {
            let j = self.n - 1;
            for i in 0..m {
                e[i] += self.theta[j * m + i];
            }
        }
        e
    }

    fn flip(&self, v: &mut [f64]) {
        v[self.m..].iter_mut().for_each(|x| *x = -*x);
    }
}

/// Solves the normal equation one connected component at a time.
pub fn solve_normal_by_components(
    sys: &NormalSystemOT,
    rhs: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    check_rhs(sys, rhs)?;
    let labels = &sys.components;
    let (m, kept) = (sys.m, sys.kept);
    let node_label = |k: usize| {
        if k < m {
            labels.row_label[k]
        } else {
            labels.col_label[k - m]
        }
    };
    let dim = sys.dim();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.count];
    let mut local = vec![0usize; dim];
    for k in 0..dim {
        let c = node_label(k);
        local[k] = members[c].len();
        members[c].push(k);
    }
    let mut edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); labels.count];
    for j in 0..kept {
        for i in 0..m {
            let t = sys.theta[j * m + i];
            if t > 0.0 {
                edges[labels.row_label[i]].push((local[i], local[m + j], -t));
            }
        }
    }
    let diag = sys.diagonal();
    let excess = sys.excess();
    let mut b = rhs.to_vec();
    sys.flip(&mut b);
    let mut out = vec![0.0; dim];
    for (nodes, mut trip) in members.iter().zip(edges) {
        if nodes.len() == 1 {
            let k = nodes[0];
            out[k] = b[k] / diag[k];
            continue;
        }
        trip.extend(nodes.iter().enumerate().map(|(l, &k)| (l, l, diag[k])));
        let block = SparseSymMatrix::from_triplets(nodes.len(), &trip)?;
        let ex: Vec<f64> = nodes.iter().map(|&k| excess[k]).collect();
        let f = sparse_cholesky_mmatrix(&block, &ex)?;
        let mut local_b: Vec<f64> = nodes.iter().map(|&k| b[k]).collect();
        f.solve_in_place(&mut local_b);
        for (&k, v) in nodes.iter().zip(local_b) {
            out[k] = v;
        }
    }
    sys.flip(&mut out);
    Ok(out)
}

/// One sparse Cholesky of the whole normal matrix.
pub fn solve_normal_monolithic(sys: &NormalSystemOT, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    check_rhs(sys, rhs)?;
    let f = sparse_cholesky_mmatrix(&sys.flipped(), &sys.excess())?;
    let mut b = rhs.to_vec();
    sys.flip(&mut b);
    f.solve_in_place(&mut b);
    sys.flip(&mut b);
    Ok(b)
}

/// PCG with an IC(0) preconditioner; returns the solution and iteration count.
pub fn solve_normal_pcg(
    sys: &NormalSystemOT,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), LinalgError> {
    check_rhs(sys, rhs)?;
    let a = sys.flipped();
    let ic = incomplete_cholesky(&a)?;
    let mut b = rhs.to_vec();
    sys.flip(&mut b);
    let sol = pcg(&a, &b, Some(&ic as &dyn Preconditioner), tol, max_iter)?;
    let mut x = sol.x;
    sys.flip(&mut x);
    Ok((x, sol.iterations))
}

fn check_rhs(sys: &NormalSystemOT, rhs: &[f64]) -> Result<(), LinalgError> {
    if rhs.len() != sys.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: sys.dim(),
            found: rhs.len(),
        });
    }
    Ok(())
}

/// Normal-equation policy for OT.
pub(crate) struct OtNormalSolver {
    kind: LinearSolverKind,
}

impl OtNormalSolver {
    pub(crate) fn new(kind: LinearSolverKind) -> Self {
        Self { kind }
    }

    fn direct(sys: &NormalSystemOT, rhs: &[f64], tol: f64) -> Result<NormalSolution, LinalgError> {
        match solve_normal_by_components(sys, rhs) {
            Ok(dy) => Ok(NormalSolution {
                dy,
                iterations: 0,
                method: LinearMethod::Components,
            }),
            Err(_) => match solve_normal_monolithic(sys, rhs) {
                Ok(dy) => Ok(NormalSolution {
                    dy,
                    iterations: 0,
                    method: LinearMethod::Direct,
                }),
                Err(_) => {
                    let (dy, iterations) = solve_normal_pcg(sys, rhs, tol, sys.dim())?;
                    Ok(NormalSolution {
                        dy,
                        iterations,
                        method: LinearMethod::Pcg,
                    })
                }
            },
        }
    }

    fn iterative(
        sys: &NormalSystemOT,
        rhs: &[f64],
        tol: f64,
    ) -> Result<NormalSolution, LinalgError> {
        match solve_normal_pcg(sys, rhs, tol, sys.dim()) {
            Ok((dy, iterations)) => Ok(NormalSolution {
                dy,
                iterations,
                method: LinearMethod::Pcg,
            }),
            Err(_) => Self::direct(sys, rhs, tol),
        }
    }
}

impl NormalSolver<OtProblem> for OtNormalSolver {
    fn solve(
        &mut self,
        problem: &OtProblem,
        rs: &ReducedSystem,
    ) -> Result<NormalSolution, SolverError> {
        let sys = NormalSystemOT::new(problem, rs.lambda, rs.theta.to_vec());
        if sys.nnz_v == 0 {
            return Ok(NormalSolution {
                dy: rs.rhs.iter().map(|r| r / rs.lambda).collect(),
                iterations: 0,
                method: LinearMethod::Diagonal,
            });
        }
        // The PCG target is relative to 1 + ||b||.
        let rel_tol = rs.inner_tol / (1.0 + crate::model::norm2(rs.rhs));
        let sparse = sys.nnz_v <= 20 * (problem.m() + problem.n());
        let out = match self.kind {
            LinearSolverKind::Direct => Self::direct(&sys, rs.rhs, rel_tol),
            LinearSolverKind::Pcg => Self::iterative(&sys, rs.rhs, rel_tol),
            LinearSolverKind::Auto if sparse => Self::direct(&sys, rs.rhs, rel_tol),
            LinearSolverKind::Auto => Self::iterative(&sys, rs.rhs, rel_tol),
        };
        out.map_err(|e| SolverError::LinearSolveFailed(e.to_string()))
    }
}

/// Newton direction at `it` using the configured linear solver.
pub fn newton_direction_ot(
    problem: &OtProblem,
    config: &SolverConfig,
    it: &SmoothingIterate,
) -> Result<NewtonDirection, SolverError> {
    newton_direction(
        problem,
        config,
        it,
        &mut OtNormalSolver::new(config.linear_solver),
    )
}

/// Solves `problem` from the standard starting point.
pub fn solve_ot(problem: &OtProblem, config: &SolverConfig) -> Result<SolveReport, SolverError> {
    let (m, n) = (problem.m(), problem.n());
    let threshold = plan_threshold(config, 1.0, m * n);
    let mut solver = OtNormalSolver::new(config.linear_solver);
    run(problem, config, &mut solver, |x| {
        (vec![SparsePlan::from_col_major(m, n, x, threshold)], None)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearSolverKind, LpStructure, Status};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = v.iter().sum();
        let mut v: Vec<f64> = v.into_iter().map(|x| x / s).collect();
        let tail: f64 = v[..k - 1].iter().sum();
        v[k - 1] = 1.0 - tail;
        v
    }

    fn random_problem(seed: u64, m: usize, n: usize, drop: bool) -> OtProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_dist(&mut rng, m);
        let b = random_dist(&mut rng, n);
        let c: Vec<f64> = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
        OtProblem::new(c, a, b, drop).unwrap()
    }

    /// Dense `lambda I + A Theta A^T` from explicit columns of `A`.
    fn dense_normal(p: &OtProblem, theta: &[f64], lambda: f64) -> Vec<f64> {
        let (nx, ny) = (p.primal_dim(), p.dual_dim());
        let mut a = vec![vec![0.0; nx]; ny];
        for k in 0..nx {
            let mut e = vec![0.0; nx];
            e[k] = 1.0;
            let col = p.apply_a(&e).unwrap();
            for i in 0..ny {
                a[i][k] = col[i];
            }
        }
        let mut out = vec![0.0; ny * ny];
        for i in 0..ny {
            for j in 0..ny {
                let s: f64 = (0..nx).map(|k| a[i][k] * theta[k] * a[j][k]).sum();
                out[i * ny + j] = s + if i == j { lambda } else { 0.0 };
            }
        }
        out
    }

    #[test]
    fn block_form_example() {
        let p = OtProblem::new(vec![0.0; 4], vec![0.5, 0.5], vec![0.5, 0.5], false).unwrap();
        let sys = NormalSystemOT::new(&p, 0.0, vec![1.0, 2.0, 3.0, 4.0]);
        let d = sys.matrix().to_dense();
        assert_eq!(
            d,
            vec![4., 0., 1., 3., 0., 6., 2., 4., 1., 2., 3., 0., 3., 4., 0., 7.]
        );
    }

    #[test]
    fn block_form_matches_dense_product() {
        for seed in 0..10 {
            let p = random_problem(seed, 4, 5, seed % 2 == 0);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let theta: Vec<f64> = (0..20)
                .map(|_| {
                    if rng.random_bool(0.4) {
                        rng.random_range(0.0..3.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let sys = NormalSystemOT::new(&p, 0.3, theta.clone());
            let want = dense_normal(&p, &theta, 0.3);
            let got = sys.matrix().to_dense();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_theta_is_diagonal() {
        let p = random_problem(1, 3, 3, true);
        let sys = NormalSystemOT::new(&p, 0.5, vec![0.0; 9]);
        let rhs = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x = solve_normal_by_components(&sys, &rhs).unwrap();
        assert_eq!(x, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(sys.components().count, 5);
    }

    #[test]
    fn components_match_monolithic_and_pcg() {
        // Two disjoint blocks in a 4 x 4 plan.
        let p = random_problem(2, 4, 4, false);
        let mut theta = vec![0.0; 16];
        for &(i, j, t) in &[
            (0, 0, 2.0),
            (1, 0, 1e3),
            (1, 1, 0.5),
            (2, 2, 4.0),
            (3, 3, 1e-3),
            (3, 2, 7.0),
        ] {
            theta[j * 4 + i] = t;
        }
        let sys = NormalSystemOT::new(&p, 1e-6, theta);
        assert_eq!(sys.components().count, 2);
        let rhs: Vec<f64> = (0..8).map(|k| (k as f64 - 3.5) * 0.1).collect();
        let a = solve_normal_by_components(&sys, &rhs).unwrap();
        let b = solve_normal_monolithic(&sys, &rhs).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
        // Backward-error scale: ||M|| ||x|| with ||M|| ~ 1e3.
        let scale = 1e3 * a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut r = vec![0.0; 8];
        sys.matrix().mul_vec(&a, &mut r);
        for (u, v) in r.iter().zip(&rhs) {
            assert!((u - v).abs() <= 1e-13 * scale);
        }
        let (c, _) = solve_normal_pcg(&sys, &rhs, 1e-13, 100).unwrap();
        sys.matrix().mul_vec(&c, &mut r);
        for (u, v) in r.iter().zip(&rhs) {
            assert!((u - v).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn dropped_column_edges_do_not_couple_rows() {
        let p = random_problem(3, 2, 2, true);
        // Both rows touch only the dropped column.
        let sys = NormalSystemOT::new(&p, 0.1, vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(sys.components().count, 3);
        let x = solve_normal_by_components(&sys, &[1.1, 2.1, 0.3]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert!((x[2] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_direction_when_nothing_is_active() {
        let p = random_problem(4, 3, 3, true);
        let cfg = SolverConfig::default();
        // Large negative x keeps w <= 0, so v2 = 0 everywhere.
        let it = SmoothingIterate::new(&p, &cfg, 0.5, vec![-10.0; 9], vec![0.0; 5]).unwrap();
        assert!(it.smoothing_argument().iter().all(|&w| w <= 0.0));
        let dir = newton_direction_ot(&p, &cfg, &it).unwrap();
        assert_eq!(dir.nnz_v, 0);
        assert_eq!(dir.lin_method, LinearMethod::Diagonal);
        let e = it.residual();
        let dz = dir.d_eps;
        for k in 0..9 {
            let rc = -e[5 + k] - cfg.kappa_c * it.x()[k] * dz;
            assert!((dir.d_x[k] - rc / 1.5).abs() < 1e-14);
        }
        for i in 0..5 {
            let rp = -e[i] - cfg.kappa_p * it.y()[i] * dz;
            let ax: f64 = p.apply_a(&dir.d_x).unwrap()[i];
            assert!((dir.d_y[i] - (rp - ax) / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_instance() {
        let p = OtProblem::new(vec![5.0], vec![1.0], vec![1.0], false).unwrap();
        let r = solve_ot(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective_primal - 5.0).abs() < 1e-7);
        assert!((r.plans[0].to_dense_col_major()[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn zero_cost_matching() {
        let p = OtProblem::new(
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            true,
        )
        .unwrap();
        let r = solve_ot(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!(r.objective_primal.abs() < 1e-7);
        let x = r.plans[0].to_dense_col_major();
        assert!((x[0] - 0.5).abs() < 1e-7 && (x[3] - 0.5).abs() < 1e-7);
        assert!(x[1].abs() < 1e-7 && x[2].abs() < 1e-7);
    }

    #[test]
    fn all_linear_solver_policies_agree() {
        let p = random_problem(5, 6, 7, true);
        let mut objs = Vec::new();
        for kind in [
            LinearSolverKind::Auto,
            LinearSolverKind::Direct,
            LinearSolverKind::Pcg,
        ] {
            let cfg = SolverConfig {
                linear_solver: kind,
                ..Default::default()
            };
            let r = solve_ot(&p, &cfg).unwrap();
            assert_eq!(r.status, Status::Optimal, "{kind:?}");
            assert!(r.max_residual() <= 1e-8);
            assert_eq!(r.eta_d, 0.0);
            assert!(p.full_marginal_residual(&r.primal) <= 1e-7);
            objs.push(r.objective_primal);
        }
        assert!((objs[0] - objs[1]).abs() <= 1e-7 && (objs[0] - objs[2]).abs() <= 1e-7);
    }

    #[test]
    fn merit_decreases_along_the_run() {
        let p = random_problem(6, 5, 5, true);
        let cfg = SolverConfig::default();
        let r = solve_ot(&p, &cfg).unwrap();
        assert!(!r.log.is_empty());
        for l in &r.log {
            assert!(l.merit_after < l.merit);
            assert!(l.eps > 0.0 && l.eps >= l.zeta * cfg.eps0);
        }
    }

    #[test]
    fn matches_simplex_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let (m, n) = (5, 5);
            let mut dist = |k: usize| {
                let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = v.iter().sum();
                let mut v: Vec<f64> = v.iter().map(|x| x / s).collect();
                let head: f64 = v[..k - 1].iter().sum();
                v[k - 1] = 1.0 - head;
                v
            };
            let a = dist(m);
            let b = dist(n);
            let c = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let p = OtProblem::new(c, a, b, true).unwrap();
            let r = solve_ot(&p, &SolverConfig::default()).unwrap();
            let o = crate::oracle::ot_reference(&p).unwrap();
            assert_eq!(r.status, Status::Optimal);
            let rel = (r.objective_primal - o.objective).abs() / o.objective.abs().max(1e-12);
            assert!(rel <= 1e-6, "{} vs {}", r.objective_primal, o.objective);
        }
    }
}
