//! Dense two-phase simplex (Bland's rule) used as an exact reference on
//! small instances.

use crate::model::{LpStructure, OtProblem, WbProblem};
use thiserror::Error;

/// Largest number of variables accepted by [`simplex_solve`].
pub const MAX_VARIABLES: usize = 500;
/// Largest `m * n` accepted by [`ot_reference`].
pub const MAX_OT_ENTRIES: usize = 200;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{found} variables exceed the oracle limit of {limit}")]
    SizeLimit { found: usize, limit: usize },
    #[error("constraint matrix has {found} entries, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite entry in the LP data")]
    NonFinite,
    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),
    #[error("final basis is singular")]
    SingularBasis,
}

/// `min c^T x  s.t.  A x = b, x >= 0` with dense row-major `A`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl DenseLp {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self, OracleError> {
        let (rows, cols) = (b.len(), c.len());
        if cols > MAX_VARIABLES {
            return Err(OracleError::SizeLimit {
                found: cols,
                limit: MAX_VARIABLES,
            });
        }
        if a.len() != rows * cols {
            return Err(OracleError::Shape {
                expected: rows * cols,
                found: a.len(),
            });
        }
        if a.iter().chain(&b).chain(&c).any(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite);
        }
        Ok(Self {
            rows,
            cols,
            a,
            b,
            c,
        })
    }

    /// Assembles the constraint matrix of `p` column by column.
    pub fn from_structure<P: LpStructure + ?Sized>(p: &P) -> Result<Self, OracleError> {
        let (nx, ny) = (p.primal_dim(), p.dual_dim());
        if nx > MAX_VARIABLES {
            return Err(OracleError::SizeLimit {
                found: nx,
                limit: MAX_VARIABLES,
            });
        }
        let mut a = vec![0.0; ny * nx];
        let mut e = vec![0.0; nx];
        let mut col = vec![0.0; ny];
        for k in 0..nx {
            e[k] = 1.0;
            p.apply_a_into(&e, &mut col);
            e[k] = 0.0;
            for i in 0..ny {
                a[i * nx + k] = col[i];
            }
        }
        Self::new(a, p.rhs().to_vec(), p.cost().to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Equality multipliers; zero on rows found redundant.
    pub y: Vec<f64>,
}

struct Tableau {
    /// `rows x (width + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for costs `c` (length `width`) under the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        let mut obj = c.to_vec();
        obj.push(0.0);
        for (r, &bj) in self.basis.iter().enumerate() {
            let cb = c[bj];
            if cb != 0.0 {
                for (v, tv) in obj.iter_mut().zip(&self.t[r]) {
                    *v -= cb * tv;
                }
            }
        }
        self.obj = obj;
    }

    /// Bland iterations over columns `< allowed`. `Ok(false)` means unbounded.
    fn optimize(&mut self, allowed: usize, budget: &mut usize) -> Result<bool, OracleError> {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.obj[j] < -COST_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for (r, row) in self.t.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[self.width] / row[c];
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => {
                            ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[r] < bb)
                        }
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            let Some((_, r, _)) = best else {
                return Ok(false);
            };
            if *budget == 0 {
                return Err(OracleError::PivotLimit(PIVOT_BUDGET));
            }
            *budget -= 1;
            self.pivot(r, c);
        }
    }
}

const PIVOT_BUDGET: usize = 200_000;

/// Solves `lp` exactly up to rounding. Redundant equality rows are detected
/// in phase one and dropped.
pub fn simplex_solve(lp: &DenseLp) -> Result<LpSolution, OracleError> {
    let (m, n) = (lp.rows, lp.cols);
    let sign: Vec<f64> =
        lp.b.iter()
            .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
            .collect();
    let width = n + m;
    let t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width + 1];
            for j in 0..n {
                row[j] = sign[i] * lp.at(i, j);
            }
            row[n + i] = 1.0;
            row[width] = sign[i] * lp.b[i];
            row
        })
        .collect();
    let mut tab = Tableau {
        t,
        obj: Vec::new(),
        basis: (n..n + m).collect(),
        width,
    };
    let mut budget = PIVOT_BUDGET;

    let mut phase1 = vec![0.0; width];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    tab.set_objective(&phase1);
    tab.optimize(width, &mut budget)?;
    let infeas: f64 = tab
        .basis
        .iter()
        .zip(&tab.t)
        .filter(|(&b, _)| b >= n)
        .map(|(_, row)| row[width])
        .sum();
    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeas > FEAS_TOL * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            x: Vec::new(),
            y: Vec::new(),
        });
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut kept = vec![true; m];
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(c) = (0..n).find(|&j| tab.t[r][j].abs() > PIVOT_TOL) {
                tab.pivot(r, c);
            } else {
                kept[r] = false;
            }
        }
    }
    let orig_row: Vec<usize> = (0..m).filter(|&r| kept[r]).collect();
    let basis_rows: Vec<usize> = orig_row.clone();
    tab.t = basis_rows.iter().map(|&r| tab.t[r].clone()).collect();
    tab.basis = basis_rows.iter().map(|&r| tab.basis[r]).collect();

    let mut phase2 = lp.c.clone();
    phase2.resize(width, 0.0);
    tab.set_objective(&phase2);
    if !tab.optimize(n, &mut budget)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            x: Vec::new(),
            y: Vec::new(),
        });
    }

    // Recompute x_B = B^{-1} b and y = B^{-T} c_B from the original data.
    let k = orig_row.len();
    let mut bmat = vec![0.0; k * k];
    for (p, &i) in orig_row.iter().enumerate() {
        for (q, &j) in tab.basis.iter().enumerate() {
            bmat[p * k + q] = lp.at(i, j);
        }
    }
    let rhs: Vec<f64> = orig_row.iter().map(|&i| lp.b[i]).collect();
    let xb = dense_solve(&bmat, k, &rhs, false).ok_or(OracleError::SingularBasis)?;
    let cb: Vec<f64> = tab.basis.iter().map(|&j| lp.c[j]).collect();
    let yk = dense_solve(&bmat, k, &cb, true).ok_or(OracleError::SingularBasis)?;
    let mut x = vec![0.0; n];
    for (&j, &v) in tab.basis.iter().zip(&xb) {
        x[j] = v.max(0.0);
    }
    let mut y = vec![0.0; m];
    for (&i, &v) in orig_row.iter().zip(&yk) {
        y[i] = v;
    }
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        x,
        y,
    })
}

/// Gaussian elimination with partial pivoting on `M` or `M^T` (row-major `k x k`).
fn dense_solve(mat: &[f64], k: usize, rhs: &[f64], transpose: bool) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if transpose {
                        mat[j * k + i]
                    } else {
                        mat[i * k + j]
                    }
                })
                .collect()
        })
        .collect();
    let mut b = rhs.to_vec();
    for col in 0..k {
        let p = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..k {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact optimum of an OT instance on the same constraints the main solver uses.
#[derive(Debug, Clone)]
pub struct Reference {
    pub objective: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

fn reference<P: LpStructure + ?Sized>(p: &P) -> Result<Reference, OracleError> {
    let lp = DenseLp::from_structure(p)?;
    let sol = simplex_solve(&lp)?;
    debug_assert_eq!(sol.status, LpStatus::Optimal);
    Ok(Reference {
        objective: sol.objective,
        primal: sol.x,
        dual: sol.y,
    })
}

/// Reference optimum for OT; `primal` is the column-major plan.
pub fn ot_reference(problem: &OtProblem) -> Result<Reference, OracleError> {
    let size = problem.m() * problem.n();
    if size > MAX_OT_ENTRIES {
        return Err(OracleError::SizeLimit {
            found: size,
            limit: MAX_OT_ENTRIES,
        });
    }
    reference(problem)
}

/// Reference optimum for WB; the barycenter weights are the last `m` entries
/// of `primal` (see [`WbProblem::weight_range`]).
pub fn wb_reference(problem: &WbProblem) -> Result<Reference, OracleError> {
    reference(problem)
}

/// North-west-corner feasible plan (column-major), an upper bound for OT.
pub fn north_west_corner(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.len(), b.len());
    let mut plan = vec![0.0; m * n];
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let q = ra[i].min(rb[j]);
        plan[j * m + i] = q;
        ra[i] -= q;
        rb[j] -= q;
        if ra[i] <= rb[j] && i + 1 < m {
            i += 1;
        } else {
            j += 1;
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        let mut v: Vec<f64> = v.iter().map(|x| x / s).collect();
        let head: f64 = v[..k - 1].iter().sum();
        v[k - 1] = 1.0 - head;
        v
    }

    fn random_ot(seed: u64, m: usize, n: usize, drop: bool) -> OtProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = dist(&mut rng, m);
        let b = dist(&mut rng, n);
        let c = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
        OtProblem::new(c, a, b, drop).unwrap()
    }

    #[test]
    fn trivial_lp() {
        let lp = DenseLp::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.y, vec![1.0]);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x1 + x2 = -1 with x >= 0.
        let lp = DenseLp::new(vec![1.0, 1.0], vec![-1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(simplex_solve(&lp).unwrap().status, LpStatus::Infeasible);
        // x1 - x2 = 1, min -x1.
        let lp = DenseLp::new(vec![1.0, -1.0], vec![1.0], vec![-1.0, 0.0]).unwrap();
        assert_eq!(simplex_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn size_limit() {
        let n = MAX_VARIABLES + 1;
        let err = DenseLp::new(vec![1.0; n], vec![1.0], vec![0.0; n]).unwrap_err();
        assert!(matches!(err, OracleError::SizeLimit { .. }));
        let p = random_ot(0, 15, 14, true);
        assert!(matches!(
            ot_reference(&p),
            Err(OracleError::SizeLimit { .. })
        ));
    }

    #[test]
    fn two_by_two_zero_cost_matching() {
        let p = OtProblem::new(
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            true,
        )
        .unwrap();
        let r = ot_reference(&p).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.primal, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn one_by_one() {
        let p = OtProblem::new(vec![0.7], vec![1.0], vec![1.0], false).unwrap();
        assert!((ot_reference(&p).unwrap().objective - 0.7).abs() < 1e-15);
    }

    #[test]
    fn degenerate_with_redundant_row() {
        // Full OT constraints (no row dropped) and a duplicated row on top.
        let p = random_ot(3, 3, 3, false);
        let lp = DenseLp::from_structure(&p).unwrap();
        let mut a = lp.a.clone();
        a.extend_from_slice(&lp.a[..lp.cols]);
        let mut b = lp.b.clone();
        b.push(lp.b[0]);
        let dup = DenseLp::new(a, b, lp.c.clone()).unwrap();
        let s1 = simplex_solve(&lp).unwrap();
        let s2 = simplex_solve(&dup).unwrap();
        assert_eq!(s2.status, LpStatus::Optimal);
        assert!((s1.objective - s2.objective).abs() < 1e-12);
        let dropped = ot_reference(&random_ot(3, 3, 3, true)).unwrap();
        assert!((s1.objective - dropped.objective).abs() < 1e-12);
    }

    #[test]
    fn degenerate_marginals_terminate() {
        // Equal marginals produce a degenerate transportation polytope.
        let u = vec![0.25; 4];
        let c: Vec<f64> = (0..16).map(|k| ((k * 7) % 5) as f64).collect();
        let p = OtProblem::new(c, u.clone(), u, true).unwrap();
        let r = ot_reference(&p).unwrap();
        assert!(r.objective >= 0.0);
    }

    fn check_reference(p: &OtProblem, r: &Reference) {
        let (m, n) = (p.m(), p.n());
        assert!(r.primal.iter().all(|&v| v >= 0.0));
        assert!(p.full_marginal_residual(&r.primal) <= 1e-10);
        let nw = north_west_corner(p.a(), p.b());
        let nw_cost: f64 = (0..m * n).map(|k| p.cost()[k] * nw[k]).sum();
        assert!(r.objective <= nw_cost + 1e-12);
        let dual: f64 = p.rhs().iter().zip(&r.dual).map(|(d, y)| d * y).sum();
        assert!((dual - r.objective).abs() <= 1e-8);
        // Dual feasibility: c - A^T y >= 0.
        let z = p.apply_at(&r.dual).unwrap();
        for (c, z) in p.cost().iter().zip(&z) {
            assert!(c - z >= -1e-9);
        }
    }

    #[test]
    fn wb_reference_is_feasible_and_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 3;
        let marg: Vec<Vec<f64>> = (0..2).map(|_| dist(&mut rng, 3)).collect();
        let d: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..9).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let p = WbProblem::new(&d, marg, vec![0.4, 0.6], m).unwrap();
        let r = wb_reference(&p).unwrap();
        let ax = p.apply_a(&r.primal).unwrap();
        for (u, v) in ax.iter().zip(p.rhs()) {
            assert!((u - v).abs() <= 1e-10);
        }
        let w = &r.primal[p.weight_range()];
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let dual: f64 = p.rhs().iter().zip(&r.dual).map(|(d, y)| d * y).sum();
        assert!((dual - r.objective).abs() <= 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn ot_reference_properties(seed in 0u64..10_000, m in 1usize..7, n in 1usize..7, drop in any::<bool>()) {
            let p = random_ot(seed, m, n, drop);
            let r = ot_reference(&p).unwrap();
            check_reference(&p, &r);
        }

        #[test]
        fn objective_below_random_feasible_plans(seed in 0u64..10_000) {
            let p = random_ot(seed, 3, 3, true);
            let r = ot_reference(&p).unwrap();
            // Mix the north-west-corner plan with the product plan.
            let nw = north_west_corner(p.a(), p.b());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: f64 = rng.random_range(0.0..1.0);
            let cost: f64 = (0..9)
                .map(|k| {
                    let prod = p.a()[k % 3] * p.b()[k / 3];
                    p.cost()[k] * (t * nw[k] + (1.0 - t) * prod)
                })
                .sum();
            prop_assert!(r.objective <= cost + 1e-12);
        }
    }
}
