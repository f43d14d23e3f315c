use super::ot::check_distribution;
use super::{norm2, LpStructure, ModelError};

/// Fixed-support Wasserstein barycenter LP.
///
/// Primal `x = (vec Pi_1; ...; vec Pi_N; w)` with `Pi_t` of size `m x n_t`;
/// constraints `Pi_t^T e_m = a_t` (dual block `y1`, `sum n_t` rows) followed
/// by `Pi_t e_{n_t} - w = 0` (dual block `y2`, `N m` rows). The cost of
/// `Pi_t` is `D_t = gamma_t * dist_t`; `w` carries zero cost.
#[derive(Debug, Clone)]
pub struct WbProblem {
    m: usize,
    ns: Vec<usize>,
    weights: Vec<f64>,
    marginals: Vec<Vec<f64>>,
    plan_offsets: Vec<usize>,
    y1_offsets: Vec<usize>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    cost_norm: f64,
    scale_c: f64,
    scale_d: f64,
    scaled_cost: Vec<f64>,
    scaled_rhs: Vec<f64>,
}

impl WbProblem {
    /// `distances[t]` is the unweighted `m x n_t` ground cost (column-major)
    /// between the barycenter support and the support of `marginals[t]`.
    pub fn new(
        distances: &[Vec<f64>],
        marginals: Vec<Vec<f64>>,
        weights: Vec<f64>,
        m: usize,
    ) -> Result<Self, ModelError> {
        let big_n = marginals.len();
        if big_n == 0 {
            return Err(ModelError::Empty("marginals"));
        }
        if m == 0 {
            return Err(ModelError::Empty("barycenter support"));
        }
        if weights.len() != big_n {
            return Err(ModelError::DimensionMismatch {
                what: "weights",
                expected: big_n,
                found: weights.len(),
            });
        }
        if distances.len() != big_n {
            return Err(ModelError::DimensionMismatch {
                what: "distances",
                expected: big_n,
                found: distances.len(),
            });
        }
        check_distribution("weights", &weights)?;
        for a in &marginals {
            check_distribution("marginal", a)?;
        }
        let ns: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let mut cost = Vec::with_capacity(ns.iter().map(|n| m * n).sum::<usize>() + m);
        let mut plan_offsets = Vec::with_capacity(big_n + 1);
        for t in 0..big_n {
            if distances[t].len() != m * ns[t] {
                return Err(ModelError::DimensionMismatch {
                    what: "distance matrix",
                    expected: m * ns[t],
                    found: distances[t].len(),
                });
            }
            if let Some(k) = distances[t]
                .iter()
                .position(|&c| !(c >= 0.0) || !c.is_finite())
            {
                return Err(ModelError::InvalidCost(cost.len() + k));
            }
            plan_offsets.push(cost.len());
            cost.extend(distances[t].iter().map(|d| d * weights[t]));
        }
        plan_offsets.push(cost.len());
        cost.extend(std::iter::repeat(0.0).take(m));

        let mut y1_offsets = Vec::with_capacity(big_n + 1);
        let mut rhs = Vec::new();
        for a in &marginals {
            y1_offsets.push(rhs.len());
            rhs.extend_from_slice(a);
        }
        y1_offsets.push(rhs.len());
        rhs.extend(std::iter::repeat(0.0).take(big_n * m));

        let cost_norm = norm2(&cost);
        let scale_c = if cost_norm > 0.0 { cost_norm } else { 1.0 };
        let scale_d = norm2(&rhs);
        let scaled_cost = cost.iter().map(|c| c / scale_c).collect();
        let scaled_rhs = rhs.iter().map(|d| d / scale_d).collect();
        Ok(Self {
            m,
            ns,
            weights,
            marginals,
            plan_offsets,
            y1_offsets,
            cost,
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

    /// Barycenter support size.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_distributions(&self) -> usize {
        self.ns.len()
    }

    /// Support size of each input distribution.
    pub fn ns(&self) -> &[usize] {
        &self.ns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    /// Range of `Pi_t` inside the primal vector.
    pub fn plan_range(&self, t: usize) -> std::ops::Range<usize> {
        self.plan_offsets[t]..self.plan_offsets[t + 1]
    }

    /// Range of the barycenter weights `w` inside the primal vector.
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        let s = self.plan_offsets[self.ns.len()];
        s..s + self.m
    }

    /// Range of `y1_t` (column-sum multipliers of `Pi_t`) in the dual vector.
    pub fn y1_range(&self, t: usize) -> std::ops::Range<usize> {
        self.y1_offsets[t]..self.y1_offsets[t + 1]
    }

    /// Range of `y2_t` (row-sum multipliers of `Pi_t`) in the dual vector.
    pub fn y2_range(&self, t: usize) -> std::ops::Range<usize> {
        let s = self.y1_offsets[self.ns.len()] + t * self.m;
        s..s + self.m
    }

    /// Total length of the `y1` block.
    pub fn y1_len(&self) -> usize {
        self.y1_offsets[self.ns.len()]
    }
}

impl LpStructure for WbProblem {
    fn primal_dim(&self) -> usize {
        self.plan_offsets[self.ns.len()] + self.m
    }

    fn dual_dim(&self) -> usize {
        self.y1_len() + self.ns.len() * self.m
    }

    fn apply_a_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        let w = &x[self.weight_range()];
        for t in 0..self.ns.len() {
            let plan = &x[self.plan_range(t)];
            let (r1, r2) = (self.y1_range(t), self.y2_range(t));
            let (cols, rows) = {
                let (lo, hi) = out.split_at_mut(r2.start);
                (&mut lo[r1], &mut hi[..m])
            };
            rows.iter_mut().zip(w).for_each(|(r, &wi)| *r = -wi);
            for (j, cs) in cols.iter_mut().enumerate() {
                let col = &plan[j * m..(j + 1) * m];
                let mut s = 0.0;
                for (r, &v) in rows.iter_mut().zip(col) {
                    *r += v;
                    s += v;
                }
                *cs = s;
            }
        }
    }

    fn apply_at_into(&self, y: &[f64], out: &mut [f64]) {
        let m = self.m;
        let wr = self.weight_range();
        out[wr.clone()].iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.ns.len() {
            let y1 = &y[self.y1_range(t)];
            let y2 = &y[self.y2_range(t)];
            let pr = self.plan_range(t);
            let plan = &mut out[pr];
            for (j, &g) in y1.iter().enumerate() {
                for (o, &f) in plan[j * m..(j + 1) * m].iter_mut().zip(y2) {
                    *o = f + g;
                }
            }
            for (o, &f) in out[wr.clone()].iter_mut().zip(y2) {
                *o -= f;
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

    /// `Pi_t = w0 a_t^T` with `w0 = e_m / m`, scaled.
    fn initial_primal(&self) -> Vec<f64> {
        let w0 = 1.0 / self.m as f64;
        let mut x = Vec::with_capacity(self.primal_dim());
        for a in &self.marginals {
            for &aj in a {
                x.extend(std::iter::repeat(w0 * aj / self.scale_d).take(self.m));
            }
        }
        x.extend(std::iter::repeat(w0 / self.scale_d).take(self.m));
        x
    }
}
