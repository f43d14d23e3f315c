use super::ordering::amd_ordering;
use super::{LinalgError, SparseSymMatrix};

/// Relative pivot floor: pivots at or below `PIVOT_FLOOR * max(diag)` are
/// reported as [`LinalgError::NotPositiveDefinite`].
pub const PIVOT_FLOOR: f64 = 1e-13;

const NONE: usize = usize::MAX;

/// Sparse Cholesky factor `P S P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Factors `s` after an approximate minimum degree reordering.
pub fn sparse_cholesky(s: &SparseSymMatrix) -> Result<CholFactor, LinalgError> {
    let perm = amd_ordering(s)?;
    factorize(s, perm, None)
}

/// Factors a symmetric diagonally dominant matrix with nonpositive
/// off-diagonal entries.
///
/// `excess[i]` must equal the row sum `s_ii + sum_{j != i} s_ij >= 0`,
/// supplied by the caller from the structure that produced `s` rather than
/// recomputed from its entries. Every pivot is then evaluated as
/// `excess + sum |off-diagonal|` of the current Schur complement, which
/// involves no cancellation, so pivots of nearly singular Laplacian-type
/// matrices keep full relative accuracy. No relative pivot floor applies;
/// only a pivot that is not strictly positive is rejected.
pub fn sparse_cholesky_mmatrix(
    s: &SparseSymMatrix,
    excess: &[f64],
) -> Result<CholFactor, LinalgError> {
    if excess.len() != s.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: s.dim(),
            found: excess.len(),
        });
    }
    for j in 0..s.dim() {
        let (rows, vals) = s.col(j);
        for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
            if v > 0.0 {
                return Err(LinalgError::PositiveOffDiagonal { row: i, col: j });
            }
        }
    }
    let perm = amd_ordering(s)?;
    factorize(s, perm, Some(excess))
}

/// Lower triangle of `P S P^T`, diagonal first in each column, rows sorted.
fn permute(s: &SparseSymMatrix, pinv: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = s.dim();
    let mut counts = vec![0usize; n];
    for j in 0..n {
        let (rows, _) = s.col(j);
        for &i in rows {
            counts[pinv[i].min(pinv[j])] += 1;
        }
    }
    let mut ptr = vec![0usize; n + 1];
    for j in 0..n {
        ptr[j + 1] = ptr[j] + counts[j];
    }
    let mut next = ptr.clone();
    let mut idx = vec![0usize; ptr[n]];
    let mut val = vec![0.0; ptr[n]];
    for j in 0..n {
        let (rows, vals) = s.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            let (a, b) = (pinv[i], pinv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            idx[next[c]] = r;
            val[next[c]] = v;
            next[c] += 1;
        }
    }
    let mut buf: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let r = ptr[j]..ptr[j + 1];
        buf.clear();
        buf.extend(
            idx[r.clone()]
                .iter()
                .copied()
                .zip(val[r.clone()].iter().copied()),
        );
        buf.sort_unstable_by_key(|e| e.0);
        for (k, (i, v)) in r.zip(buf.iter()) {
            idx[k] = *i;
            val[k] = *v;
        }
    }
    (ptr, idx, val)
}

fn factorize(
    s: &SparseSymMatrix,
    perm: Vec<usize>,
    excess: Option<&[f64]>,
) -> Result<CholFactor, LinalgError> {
    let n = s.dim();
    let mut pinv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        pinv[old] = new;
    }
    let (a_ptr, a_idx, a_val) = permute(s, &pinv);

    // Elimination tree from the row structure of the lower triangle.
    let mut parent = vec![NONE; n];
    {
        let mut ancestor = vec![NONE; n];
        let mut row_lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for j in 0..n {
            for &i in &a_idx[a_ptr[j] + 1..a_ptr[j + 1]] {
                row_lists[i].push(j);
            }
        }
        for k in 0..n {
            for &start in &row_lists[k] {
                let mut i = start;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }
    }

    // Symbolic factorization: struct(L_k) = struct(A_k) U struct(L_c) over children c.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, &p) in parent.iter().enumerate() {
        if p != NONE {
            children[p].push(j);
        }
    }
    let mut l_ptr = vec![0usize; n + 1];
    let mut l_idx: Vec<usize> = Vec::new();
    let mut mark = vec![NONE; n];
    let mut pattern: Vec<usize> = Vec::new();
    for k in 0..n {
        pattern.clear();
        mark[k] = k;
        for &i in &a_idx[a_ptr[k] + 1..a_ptr[k + 1]] {
            if mark[i] != k {
                mark[i] = k;
                pattern.push(i);
            }
        }
        for &c in &children[k] {
            for &i in &l_idx[l_ptr[c] + 1..l_ptr[c + 1]] {
                if i != k && mark[i] != k {
                    mark[i] = k;
                    pattern.push(i);
                }
            }
        }
        pattern.sort_unstable();
        l_idx.push(k);
        l_idx.extend_from_slice(&pattern);
        l_ptr[k + 1] = l_idx.len();
    }
    let mut l_val = vec![0.0; l_idx.len()];

    // Numeric left-looking factorization with per-column row pointers.
    let max_diag = (0..n).map(|j| a_val[a_ptr[j]]).fold(0.0f64, f64::max);
    let floor = PIVOT_FLOOR * max_diag;
    let mut work = vec![0.0; n];
    let mut head = vec![NONE; n];
    let mut link = vec![NONE; n];
    let mut pos = vec![0usize; n];
    let mut slack: Vec<f64> = match excess {
        Some(e) => perm.iter().map(|&old| e[old]).collect(),
        None => Vec::new(),
    };
    let mut slack_ratio = vec![0.0; if excess.is_some() { n } else { 0 }];

    for k in 0..n {
        for p in a_ptr[k]..a_ptr[k + 1] {
            work[a_idx[p]] = a_val[p];
        }
        let mut j = head[k];
        while j != NONE {
            let next_j = link[j];
            let p = pos[j];
            let lkj = l_val[p];
            for q in p..l_ptr[j + 1] {
                work[l_idx[q]] -= l_val[q] * lkj;
            }
            if excess.is_some() {
                slack[k] += lkj.abs() * slack_ratio[j];
            }
            pos[j] = p + 1;
            if p + 1 < l_ptr[j + 1] {
                let r = l_idx[p + 1];
                link[j] = head[r];
                head[r] = j;
            }
            j = next_j;
        }

        let d = if excess.is_some() {
            let off: f64 = l_idx[l_ptr[k] + 1..l_ptr[k + 1]]
                .iter()
                .map(|&i| work[i].abs())
                .sum();
            slack[k] + off
        } else {
            work[k]
        };
        let bad = if excess.is_some() {
            !(d > 0.0) || !d.is_finite()
        } else {
            !(d > floor) || !d.is_finite()
        };
        if bad {
            return Err(LinalgError::NotPositiveDefinite {
                column: perm[k],
                pivot: d,
            });
        }
        let lkk = d.sqrt();
        work[k] = 0.0;
        l_val[l_ptr[k]] = lkk;
        for q in l_ptr[k] + 1..l_ptr[k + 1] {
            let i = l_idx[q];
            l_val[q] = work[i] / lkk;
            work[i] = 0.0;
        }
        if excess.is_some() {
            slack_ratio[k] = slack[k] / lkk;
        }
        pos[k] = l_ptr[k] + 1;
        if pos[k] < l_ptr[k + 1] {
            let r = l_idx[pos[k]];
            link[k] = head[r];
            head[r] = k;
        }
    }

    Ok(CholFactor {
        perm,
        col_ptr: l_ptr,
        row_idx: l_idx,
        values: l_val,
    })
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Fill-reducing permutation, `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Number of stored entries of `L` (including the diagonal).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `L` as `(col_ptr, row_idx, values)` in the permuted ordering.
    pub fn lower(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.col_ptr, &self.row_idx, &self.values)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let p0 = self.col_ptr[j];
            let yj = y[j] / self.values[p0];
            y[j] = yj;
            for q in p0 + 1..self.col_ptr[j + 1] {
                y[self.row_idx[q]] -= self.values[q] * yj;
            }
        }
        for j in (0..n).rev() {
            let p0 = self.col_ptr[j];
            let mut acc = y[j];
            for q in p0 + 1..self.col_ptr[j + 1] {
                acc -= self.values[q] * y[self.row_idx[q]];
            }
            y[j] = acc / self.values[p0];
        }
        for (k, &old) in self.perm.iter().enumerate() {
            b[old] = y[k];
        }
    }

    /// Dense row-major `P^T L L^T P`, for verification at small sizes.
    pub fn reconstruct_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            for q in self.col_ptr[j]..self.col_ptr[j + 1] {
                l[self.row_idx[q] * n + j] = self.values[q];
            }
        }
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += l[a * n + k] * l[b * n + k];
                }
                out[self.perm[a] * n + self.perm[b]] = acc;
            }
        }
        out
    }
}
