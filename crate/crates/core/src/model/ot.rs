use super::{norm2, LpStructure, ModelError};

/// Discrete optimal transport between `a` (length `m`) and `b` (length `n`)
/// under cost `C` (`m x n`, column-major).
///
/// The equality constraints are `X e_n = a` and `X^T e_m = b`. With
/// `drop_last_row` the redundant last column-sum constraint is removed, so
/// the dual vector has `m + n - 1` entries.
#[derive(Debug, Clone)]
pub struct OtProblem {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    drop_last_row: bool,
    rhs: Vec<f64>,
    cost_norm: f64,
    scale_c: f64,
    scale_d: f64,
    scaled_cost: Vec<f64>,
    scaled_rhs: Vec<f64>,
}

pub(crate) const MASS_TOL: f64 = 1e-12;

pub(crate) fn check_distribution(name: &'static str, v: &[f64]) -> Result<(), ModelError> {
    if v.is_empty() {
        return Err(ModelError::Empty(name));
    }
    if let Some(k) = v.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(ModelError::NonPositiveMass { name, index: k });
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > MASS_TOL {
        return Err(ModelError::NotNormalized { name, sum: s });
    }
    Ok(())
}

impl OtProblem {
    pub fn new(
        cost: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        drop_last_row: bool,
    ) -> Result<Self, ModelError> {
        check_distribution("a", &a)?;
        check_distribution("b", &b)?;
        let (m, n) = (a.len(), b.len());
        if cost.len() != m * n {
            return Err(ModelError::DimensionMismatch {
                what: "cost",
                expected: m * n,
                found: cost.len(),
            });
        }
        if let Some(k) = cost.iter().position(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(ModelError::InvalidCost(k));
        }
        let mut rhs = a.clone();
        let kept = if drop_last_row { n - 1 } else { n };
        rhs.extend_from_slice(&b[..kept]);
        let cost_norm = norm2(&cost);
        // An all-zero cost has nothing to scale.
        let scale_c = if cost_norm > 0.0 { cost_norm } else { 1.0 };
        let scale_d = norm2(&rhs);
        let scaled_cost = cost.iter().map(|c| c / scale_c).collect();
        let scaled_rhs = rhs.iter().map(|d| d / scale_d).collect();
        Ok(Self {
            m,
            n,
            cost,
            a,
            b,
            drop_last_row,
            rhs,
            cost_norm,
            scale_c,
            scale_d,
            scaled_cost,
            scaled_rhs,
        })
    }

    /// Same instance solved on unscaled data (`scale_c = scale_d = 1`).
    pub fn without_scaling(mut self) -> Self {
        self.scale_c = 1.0;
        self.scale_d = 1.0;
        self.scaled_cost = self.cost.clone();
        self.scaled_rhs = self.rhs.clone();
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn drop_last_row(&self) -> bool {
        self.drop_last_row
    }

    /// Number of column-sum constraints kept in the dual.
    pub fn kept_cols(&self) -> usize {
        if self.drop_last_row {
            self.n - 1
        } else {
            self.n
        }
    }

    /// Cost matrix entry `C_ij`.
    pub fn cost_at(&self, i: usize, j: usize) -> f64 {
        self.cost[j * self.m + i]
    }

    /// Largest marginal violation `max(|X e - a|, |X^T e - b|)` over all
    /// `m + n` constraints, including a dropped one.
    pub fn full_marginal_residual(&self, x: &[f64]) -> f64 {
        let (m, n) = (self.m, self.n);
        let mut rows = vec![0.0; m];
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let col = &x[j * m..(j + 1) * m];
            let mut cs = 0.0;
            for (i, &v) in col.iter().enumerate() {
                rows[i] += v;
                cs += v;
            }
            worst = worst.max((cs - self.b[j]).abs());
        }
        for i in 0..m {
            worst = worst.max((rows[i] - self.a[i]).abs());
        }
        worst
    }
}

impl LpStructure for OtProblem {
    fn primal_dim(&self) -> usize {
        self.m * self.n
    }

    fn dual_dim(&self) -> usize {
        self.m + self.kept_cols()
    }

    fn apply_a_into(&self, x: &[f64], out: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        let kept = self.kept_cols();
        out[..m].iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let col = &x[j * m..(j + 1) * m];
            let mut cs = 0.0;
            for (acc, &v) in out[..m].iter_mut().zip(col) {
                *acc += v;
                cs += v;
            }
            if j < kept {
                out[m + j] = cs;
            }
        }
    }

    fn apply_at_into(&self, y: &[f64], out: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        let kept = self.kept_cols();
        let f = &y[..m];
        for j in 0..n {
            let g = if j < kept { y[m + j] } else { 0.0 };
            for (o, &fi) in out[j * m..(j + 1) * m].iter_mut().zip(f) {
                *o = fi + g;
            }
        }
    }

    fn cost(&self) -> &[f64] {
        &self.cost
    }

    fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    fn scaled_cost(&self) -> &[f64] {
        &self.scaled_cost
    }

    fn scaled_rhs(&self) -> &[f64] {
        &self.scaled_rhs
    }

    fn cost_norm(&self) -> f64 {
        self.cost_norm
    }

    fn scale_c(&self) -> f64 {
        self.scale_c
    }

    fn scale_d(&self) -> f64 {
        self.scale_d
    }

    /// `vec(a b^T)` in scaled coordinates.
    fn initial_primal(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.m * self.n);
        for &bj in &self.b {
            x.extend(self.a.iter().map(|&ai| ai * bj / self.scale_d));
        }
        x
    }
}
