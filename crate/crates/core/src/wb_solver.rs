//! Smoothing Newton solver for fixed-support Wasserstein barycenters.
//!
//! With `V_t = mat(theta_t)` and `D_t = V_t^T e_m + lambda e`, the normal
//! matrix splits as
//!
//! ```text
//! [ E1    E2 ]   E1 = Diag(D_1, ..., D_N)
//! [ E2^T  E3 ]   E2 = Diag(V_1^T, ..., V_N^T)
//!                E3 = Diag(Diag(V_t e + lambda)) + (e_N e_N^T) (x) Diag(theta_bar)
//! ```
//!
//! Eliminating the `y1` block leaves the Schur complement
//! `S = Diag(S_1, ..., S_N) + (e_N e_N^T) (x) Diag(theta_bar)` with
//! `S_t = Diag(V_t e + lambda) - V_t Diag(D_t)^{-1} V_t^T`, which is solved by
//! PCG and, when that stalls, by sparse Cholesky.

use crate::linalg::{
    incomplete_cholesky, pcg, sparse_cholesky, CholFactor, LinalgError, Preconditioner,
    SparseSymMatrix,
};
use crate::model::{
    norm2, LinearMethod, LinearSolverKind, LpStructure, SolveReport, SolverConfig, SparsePlan,
    WbProblem,
};
use crate::newton::{
    newton_direction, plan_threshold, run, NewtonDirection, NormalSolution, NormalSolver,
    ReducedSystem, SmoothingIterate, SolverError,
};

/// PCG steps on `S` before switching to a direct factorization.
pub const PCG_SWITCH: usize = 80;

/// Block data of one WB Newton step.
#[derive(Debug, Clone)]
pub struct WbNewtonBlocks {
    m: usize,
    ns: Vec<usize>,
    lambda: f64,
    /// `theta_t`, column-major `m x n_t`.
    theta_t: Vec<Vec<f64>>,
    theta_bar: Vec<f64>,
    /// `D_t = V_t^T e_m + lambda`.
    e1_diag: Vec<Vec<f64>>,
    schur_blocks: Vec<SparseSymMatrix>,
    schur: SparseSymMatrix,
}

/// Builds the blocks from `Theta = sigma V2 ((1 + kappa_c eps) I - V2)^{-1}`.
pub fn build_blocks(
    problem: &WbProblem,
    config: &SolverConfig,
    eps: f64,
    v2: &[f64],
) -> Result<WbNewtonBlocks, SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::NonPositiveEps(eps));
    }
    let sigma = config.sigma_for(problem);
    let g = 1.0 + config.kappa_c * eps;
    let theta: Vec<f64> = v2
        .iter()
        .map(|&v| if v > 0.0 { sigma * v / (g - v) } else { 0.0 })
        .collect();
    Ok(WbNewtonBlocks::new(problem, config.kappa_p * eps, &theta))
}

impl WbNewtonBlocks {
    pub(crate) fn new(problem: &WbProblem, lambda: f64, theta: &[f64]) -> Self {
        let m = problem.m();
        let big_n = problem.num_distributions();
        let theta_t: Vec<Vec<f64>> = (0..big_n)
            .map(|t| theta[problem.plan_range(t)].to_vec())
            .collect();
        let theta_bar = theta[problem.weight_range()].to_vec();
        let mut e1_diag = Vec::with_capacity(big_n);
        let mut schur_blocks = Vec::with_capacity(big_n);
        for v in &theta_t {
            let (d, s) = schur_block(m, v, lambda);
            e1_diag.push(d);
            schur_blocks.push(s);
        }
        let schur = assemble_schur(m, &schur_blocks, &theta_bar);
        Self {
            m,
            ns: problem.ns().to_vec(),
            lambda,
            theta_t,
            theta_bar,
            e1_diag,
            schur_blocks,
            schur,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta_t(&self, t: usize) -> &[f64] {
        &self.theta_t[t]
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    /// Diagonal of `E1` for distribution `t`.
    pub fn e1_diag(&self, t: usize) -> &[f64] {
        &self.e1_diag[t]
    }

    pub fn schur_block(&self, t: usize) -> &SparseSymMatrix {
        &self.schur_blocks[t]
    }

    /// `sqrt(theta_bar)`: the coupling term is `U U^T` with `U = e_N (x) Diag(sqrt(theta_bar))`.
    pub fn low_rank_diag(&self) -> Vec<f64> {
        self.theta_bar.iter().map(|t| t.sqrt()).collect()
    }

    /// Assembled `S`, indexed `t * m + i`.
    pub fn schur(&self) -> &SparseSymMatrix {
        &self.schur
    }

    fn y1_len(&self) -> usize {
        self.ns.iter().sum()
    }

    /// `R3 = R2 - E2^T E1^{-1} R1`.
    fn reduced_rhs(&self, r: &[f64]) -> Vec<f64> {
        let m = self.m;
        let off1 = self.y1_len();
        let mut r3 = r[off1..].to_vec();
        let mut start = 0;
        for (t, &n) in self.ns.iter().enumerate() {
            let v = &self.theta_t[t];
            let out = &mut r3[t * m..(t + 1) * m];
            for j in 0..n {
                let q = r[start + j] / self.e1_diag[t][j];
                if q == 0.0 {
                    continue;
                }
                for (o, &vij) in out.iter_mut().zip(&v[j * m..(j + 1) * m]) {
                    *o -= vij * q;
                }
            }
            start += n;
        }
        r3
    }

    /// `dy1_t = (R1_t - V_t^T dy2_t) ./ D_t`.
    fn back_substitute(&self, r: &[f64], dy2: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut dy1 = Vec::with_capacity(self.y1_len());
        let mut start = 0;
        for (t, &n) in self.ns.iter().enumerate() {
            let v = &self.theta_t[t];
            let y2 = &dy2[t * m..(t + 1) * m];
            for j in 0..n {
                let s: f64 = v[j * m..(j + 1) * m]
                    .iter()
                    .zip(y2)
                    .map(|(a, b)| a * b)
                    .sum();
                dy1.push((r[start + j] - s) / self.e1_diag[t][j]);
            }
            start += n;
        }
        dy1
    }
}

/// `D = V^T e + lambda` and `S_t` for one `m x n` block `V`.
///
/// Off-diagonals are `-sum_j V_ij V_kj / D_j`. The diagonal is formed as
/// `lambda + sum_j V_ij (D_j - V_ij) / D_j` with `D_j - V_ij` summed from the
/// other entries of column `j`, so it carries no cancellation.
fn schur_block(m: usize, v: &[f64], lambda: f64) -> (Vec<f64>, SparseSymMatrix) {
    let n = v.len() / m;
    let mut d = vec![lambda; n];
    let mut col_nz: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut row_nz: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut diag = vec![lambda; m];
    for j in 0..n {
        let col = &v[j * m..(j + 1) * m];
        let (mut imax, mut vmax) = (usize::MAX, 0.0);
        let mut sum = 0.0;
        for (i, &x) in col.iter().enumerate() {
            if x > 0.0 {
                col_nz[j].push(i);
                row_nz[i].push(j);
                sum += x;
                if x > vmax {
                    vmax = x;
                    imax = i;
                }
            }
        }
        if col_nz[j].is_empty() {
            continue;
        }
        let rest: f64 = col_nz[j]
            .iter()
            .filter(|&&i| i != imax)
            .map(|&i| col[i])
            .sum();
        d[j] = lambda + sum;
        for &i in &col_nz[j] {
            let others = if i == imax {
                lambda + rest
            } else {
                lambda + sum - col[i]
            };
            diag[i] += col[i] * others / d[j];
        }
    }
    // Lower triangle by columns with a dense accumulator.
    let mut col_ptr = Vec::with_capacity(m + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    let mut work = vec![0.0; m];
    let mut mark = vec![usize::MAX; m];
    let mut touched = Vec::new();
    col_ptr.push(0);
    for i in 0..m {
        row_idx.push(i);
        values.push(diag[i]);
        touched.clear();
        for &j in &row_nz[i] {
            let w = v[j * m + i] / d[j];
            for &k in &col_nz[j] {
                if k > i {
                    if mark[k] != i {
                        mark[k] = i;
                        work[k] = 0.0;
                        touched.push(k);
                    }
                    work[k] -= w * v[j * m + k];
                }
            }
        }
        touched.sort_unstable();
        for &k in &touched {
            row_idx.push(k);
            values.push(work[k]);
        }
        col_ptr.push(row_idx.len());
    }
    (
        d,
        SparseSymMatrix::from_sorted_parts(m, col_ptr, row_idx, values),
    )
}

fn assemble_schur(m: usize, blocks: &[SparseSymMatrix], theta_bar: &[f64]) -> SparseSymMatrix {
    let big_n = blocks.len();
    let dim = big_n * m;
    let mut col_ptr = Vec::with_capacity(dim + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for (t, b) in blocks.iter().enumerate() {
        for i in 0..m {
            let (rows, vals) = b.col(i);
            let tb = theta_bar[i];
            row_idx.push(t * m + i);
            values.push(vals[0] + tb);
            for (&k, &x) in rows[1..].iter().zip(&vals[1..]) {
                row_idx.push(t * m + k);
                values.push(x);
            }
            if tb > 0.0 {
                for s in t + 1..big_n {
                    row_idx.push(s * m + i);
                    values.push(tb);
                }
            }
            col_ptr.push(row_idx.len());
        }
    }
    SparseSymMatrix::from_sorted_parts(dim, col_ptr, row_idx, values)
}

/// How [`solve_dy_wb`] treats the Schur system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchurStrategy {
    /// PCG with IC(0), capped at [`PCG_SWITCH`] steps, then direct.
    PcgThenDirect { tol: f64 },
    /// Sparse Cholesky first.
    Direct { tol: f64 },
}

/// Solution of the WB normal equation.
#[derive(Debug, Clone, PartialEq)]
pub struct WbStep {
    pub dy1: Vec<f64>,
    pub dy2: Vec<f64>,
    pub iterations: usize,
    pub method: LinearMethod,
}

/// Solves `(lambda I + A Theta A^T) dy = R` through the Schur complement.
/// `tol` bounds `||S dy2 - R3||` relative to `1 + ||R3||` for the PCG paths.
pub fn solve_dy_wb(
    blocks: &WbNewtonBlocks,
    r: &[f64],
    strategy: SchurStrategy,
) -> Result<WbStep, LinalgError> {
    let dim = blocks.y1_len() + blocks.schur.dim();
    if r.len() != dim {
        return Err(LinalgError::DimensionMismatch {
            expected: dim,
            found: r.len(),
        });
    }
    let r3 = blocks.reduced_rhs(r);
    let s = &blocks.schur;
    let (dy2, iterations, method) = match strategy {
        SchurStrategy::PcgThenDirect { tol } => {
            let first = incomplete_cholesky(s)
                .and_then(|ic| pcg(s, &r3, Some(&ic as &dyn Preconditioner), tol, PCG_SWITCH));
            match first {
                Ok(sol) => (sol.x, sol.iterations, LinearMethod::Pcg),
                Err(_) => direct_schur(s, &r3, tol)?,
            }
        }
        SchurStrategy::Direct { tol } => direct_schur(s, &r3, tol)?,
    };
    let dy1 = blocks.back_substitute(r, &dy2);
    Ok(WbStep {
        dy1,
        dy2,
        iterations,
        method,
    })
}

/// Cholesky of `S`; if a pivot falls under the floor, PCG preconditioned by
/// the factor of a slightly shifted `S`.
fn direct_schur(
    s: &SparseSymMatrix,
    r3: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, usize, LinearMethod), LinalgError> {
    match sparse_cholesky(s) {
        Ok(f) => {
            let x = refine(s, &f, r3);
            Ok((x, 0, LinearMethod::Direct))
        }
        Err(LinalgError::NotPositiveDefinite { .. }) => {
            let mut shift = 1e-12;
            let f = loop {
                match sparse_cholesky(&shifted(s, shift)) {
                    Ok(f) => break f,
                    Err(LinalgError::NotPositiveDefinite { .. }) if shift < 1e-2 => shift *= 100.0,
                    Err(e) => return Err(e),
                }
            };
            let sol = pcg(
                s,
                r3,
                Some(&f as &dyn Preconditioner),
                tol,
                s.dim().max(PCG_SWITCH),
            )?;
            Ok((sol.x, sol.iterations, LinearMethod::Pcg))
        }
        Err(e) => Err(e),
    }
}

/// Solve with one step of iterative refinement.
fn refine(s: &SparseSymMatrix, f: &CholFactor, b: &[f64]) -> Vec<f64> {
    let mut x = f.solve(b);
    let mut r = vec![0.0; b.len()];
    s.mul_vec(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    f.solve_in_place(&mut r);
    for (xi, di) in x.iter_mut().zip(&r) {
        *xi += di;
    }
    x
}

fn shifted(s: &SparseSymMatrix, alpha: f64) -> SparseSymMatrix {
    let mut trip = Vec::with_capacity(s.nnz());
    for j in 0..s.dim() {
        let (rows, vals) = s.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            trip.push((i, j, if i == j { v * (1.0 + alpha) } else { v }));
        }
    }
    SparseSymMatrix::from_triplets(s.dim(), &trip).expect("shifted copy of a valid matrix")
}

pub(crate) struct WbNormalSolver {
    kind: LinearSolverKind,
}

impl WbNormalSolver {
    pub(crate) fn new(kind: LinearSolverKind) -> Self {
        Self { kind }
    }
}

impl NormalSolver<WbProblem> for WbNormalSolver {
    fn solve(
        &mut self,
        problem: &WbProblem,
        rs: &ReducedSystem,
    ) -> Result<NormalSolution, SolverError> {
        if rs.theta.iter().all(|&t| t == 0.0) {
            return Ok(NormalSolution {
                dy: rs.rhs.iter().map(|r| r / rs.lambda).collect(),
                iterations: 0,
                method: LinearMethod::Diagonal,
            });
        }
        let blocks = WbNewtonBlocks::new(problem, rs.lambda, rs.theta);
        let tol = rs.inner_tol / (1.0 + norm2(rs.rhs));
        let strategy = match self.kind {
            LinearSolverKind::Direct => SchurStrategy::Direct { tol },
            LinearSolverKind::Auto | LinearSolverKind::Pcg => SchurStrategy::PcgThenDirect { tol },
        };
        let step = solve_dy_wb(&blocks, rs.rhs, strategy)
            .map_err(|e| SolverError::LinearSolveFailed(e.to_string()))?;
        let mut dy = step.dy1;
        dy.extend_from_slice(&step.dy2);
        Ok(NormalSolution {
            dy,
            iterations: step.iterations,
            method: step.method,
        })
    }
}

pub fn newton_direction_wb(
    problem: &WbProblem,
    config: &SolverConfig,
    it: &SmoothingIterate,
) -> Result<NewtonDirection, SolverError> {
    newton_direction(
        problem,
        config,
        it,
        &mut WbNormalSolver::new(config.linear_solver),
    )
}

/// Solves `problem` from the standard starting point. The report carries the
/// barycenter weights and one plan per input distribution.
pub fn solve_wb(problem: &WbProblem, config: &SolverConfig) -> Result<SolveReport, SolverError> {
    let m = problem.m();
    let total: usize = problem.primal_dim();
    let threshold = plan_threshold(config, 1.0, total);
    let mut solver = WbNormalSolver::new(config.linear_solver);
    run(problem, config, &mut solver, |x| {
        let plans = (0..problem.num_distributions())
            .map(|t| {
                SparsePlan::from_col_major(m, problem.ns()[t], &x[problem.plan_range(t)], threshold)
            })
            .collect();
        (plans, Some(x[problem.weight_range()].to_vec()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Status;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = v.iter().sum();
        let mut v: Vec<f64> = v.iter().map(|x| x / s).collect();
        let head: f64 = v[..k - 1].iter().sum();
        v[k - 1] = 1.0 - head;
        v
    }

    fn random_problem(seed: u64, big_n: usize, m: usize, n: usize) -> WbProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let marg = (0..big_n).map(|_| dist(&mut rng, n)).collect();
        let w = dist(&mut rng, big_n);
        let d: Vec<Vec<f64>> = (0..big_n)
            .map(|_| (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        WbProblem::new(&d, marg, w, m).unwrap()
    }

    fn dense_a(p: &WbProblem) -> Vec<Vec<f64>> {
        let (nx, ny) = (p.primal_dim(), p.dual_dim());
        let mut a = vec![vec![0.0; nx]; ny];
        for k in 0..nx {
            let mut e = vec![0.0; nx];
            e[k] = 1.0;
            let c = p.apply_a(&e).unwrap();
            for i in 0..ny {
                a[i][k] = c[i];
            }
        }
        a
    }

    fn dense_normal(p: &WbProblem, theta: &[f64], lambda: f64) -> Vec<Vec<f64>> {
        let a = dense_a(p);
        let ny = a.len();
        let mut out = vec![vec![0.0; ny]; ny];
        for i in 0..ny {
            for j in 0..ny {
                out[i][j] = (0..theta.len())
                    .map(|k| a[i][k] * theta[k] * a[j][k])
                    .sum::<f64>()
                    + if i == j { lambda } else { 0.0 };
            }
        }
        out
    }

    fn random_theta(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len)
            .map(|_| {
                if rng.random_bool(0.6) {
                    rng.random_range(0.01..5.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn zero_theta_gives_lambda_identity() {
        let p = random_problem(1, 2, 3, 3);
        let b = WbNewtonBlocks::new(&p, 0.25, &vec![0.0; p.primal_dim()]);
        let s = b.schur().to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(s[i * 6 + j], if i == j { 0.25 } else { 0.0 });
            }
        }
        let r: Vec<f64> = (0..p.dual_dim()).map(|k| k as f64).collect();
        let st = solve_dy_wb(&b, &r, SchurStrategy::Direct { tol: 1e-12 }).unwrap();
        let dy: Vec<f64> = st.dy1.iter().chain(&st.dy2).copied().collect();
        for (d, rr) in dy.iter().zip(&r) {
            assert!((d - rr / 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn schur_matches_dense_elimination() {
        for seed in 0..5 {
            let p = random_problem(seed, 1 + seed as usize % 3, 3, 2 + seed as usize % 2);
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let theta = random_theta(&mut rng, p.primal_dim());
            let lambda = 0.1;
            let b = WbNewtonBlocks::new(&p, lambda, &theta);
            let full = dense_normal(&p, &theta, lambda);
            let k = p.y1_len();
            let ny = p.dual_dim();
            // S = E3 - E2^T E1^{-1} E2 with E1 diagonal.
            let ns = ny - k;
            let s = b.schur().to_dense();
            for i in 0..ns {
                for j in 0..ns {
                    let mut want = full[k + i][k + j];
                    for l in 0..k {
                        want -= full[k + i][l] * full[l][k + j] / full[l][l];
                    }
                    assert!((s[i * ns + j] - want).abs() <= 1e-12 * (1.0 + want.abs()));
                }
            }
        }
    }

    #[test]
    fn schur_solve_matches_dense_solve() {
        for seed in 0..5 {
            let p = random_problem(seed, 2, 3, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(80 + seed);
            let theta = random_theta(&mut rng, p.primal_dim());
            let b = WbNewtonBlocks::new(&p, 0.05, &theta);
            let r: Vec<f64> = (0..p.dual_dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let full = dense_normal(&p, &theta, 0.05);
            for strategy in [
                SchurStrategy::Direct { tol: 1e-14 },
                SchurStrategy::PcgThenDirect { tol: 1e-13 },
            ] {
                let st = solve_dy_wb(&b, &r, strategy).unwrap();
                let dy: Vec<f64> = st.dy1.iter().chain(&st.dy2).copied().collect();
                let rn = norm2(&r);
                let res: f64 = full
                    .iter()
                    .zip(&r)
                    .map(|(row, ri)| {
                        let s: f64 = row.iter().zip(&dy).map(|(a, b)| a * b).sum();
                        (s - ri).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                assert!(res <= 1e-9 * (1.0 + rn), "{strategy:?}: {res}");
            }
            let zero = solve_dy_wb(
                &b,
                &vec![0.0; p.dual_dim()],
                SchurStrategy::Direct { tol: 1e-12 },
            )
            .unwrap();
            assert!(zero.dy1.iter().chain(&zero.dy2).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn e1_block_recomposes_r1() {
        let p = random_problem(9, 3, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = random_theta(&mut rng, p.primal_dim());
        let b = WbNewtonBlocks::new(&p, 0.01, &theta);
        let r: Vec<f64> = (0..p.dual_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let st = solve_dy_wb(&b, &r, SchurStrategy::Direct { tol: 1e-14 }).unwrap();
        let full = dense_normal(&p, &theta, 0.01);
        let dy: Vec<f64> = st.dy1.iter().chain(&st.dy2).copied().collect();
        for i in 0..p.y1_len() {
            let s: f64 = full[i].iter().zip(&dy).map(|(a, b)| a * b).sum();
            assert!((s - r[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn self_barycenter() {
        // m = n, zero diagonal distance: the barycenter equals the input.
        let a = vec![0.2, 0.3, 0.5];
        let d = vec![0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0];
        let p = WbProblem::new(&[d], vec![a.clone()], vec![1.0], 3).unwrap();
        let r = solve_wb(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!(r.objective_primal.abs() < 1e-7);
        let w = r.barycenter.unwrap();
        for (u, v) in w.iter().zip(&a) {
            assert!((u - v).abs() < 1e-7);
        }
    }

    #[test]
    fn identical_inputs_cost_nothing() {
        let a = vec![0.5, 0.25, 0.25];
        let d = vec![0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0];
        let p = WbProblem::new(&[d.clone(), d], vec![a.clone(), a], vec![0.5, 0.5], 3).unwrap();
        let r = solve_wb(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!(r.objective_primal.abs() < 1e-7);
        let w = r.barycenter.unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn random_instances_reach_optimality() {
        for seed in 0..4 {
            let p = random_problem(seed, 3, 5, 5);
            let r = solve_wb(&p, &SolverConfig::default()).unwrap();
            assert_eq!(r.status, Status::Optimal, "seed {seed}");
            assert!(r.max_residual() <= 1e-8);
            let w = r.barycenter.unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            for l in &r.log {
                assert!(l.merit_after < l.merit);
            }
        }
    }

    #[test]
    fn matches_simplex_reference() {
        for seed in 0..6 {
            let p = random_problem(100 + seed, 3, 5, 5);
            let r = solve_wb(&p, &SolverConfig::default()).unwrap();
            let o = crate::oracle::wb_reference(&p).unwrap();
            let rel = (r.objective_primal - o.objective).abs() / o.objective.abs().max(1e-12);
            assert!(
                rel <= 1e-6,
                "seed {seed}: {} vs {}",
                r.objective_primal,
                o.objective
            );
        }
    }
}
