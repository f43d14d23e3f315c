use super::{LinalgError, Preconditioner, SparseSymMatrix};

/// Zero-fill incomplete Cholesky factor `L` with the sparsity pattern of
/// the lower triangle of the input, stored by rows.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    row_ptr: Vec<usize>,
    /// Column indices of each row, ascending; the diagonal is last.
    col_idx: Vec<usize>,
    values: Vec<f64>,
    /// Relative diagonal shift that was needed, zero if none.
    shift: f64,
}

const INITIAL_SHIFT: f64 = 1e-3;
const MAX_SHIFT_RETRIES: usize = 3;

/// IC(0) of `s`. On pivot breakdown the factorization is retried on
/// `s + alpha * Diag(s)` with `alpha = 1e-3`, doubling up to three times.
pub fn incomplete_cholesky(s: &SparseSymMatrix) -> Result<IncompleteCholesky, LinalgError> {
    if let Some(f) = try_ic0(s, 0.0) {
        return Ok(f);
    }
    let mut alpha = INITIAL_SHIFT;
    for _ in 0..MAX_SHIFT_RETRIES {
        if let Some(f) = try_ic0(s, alpha) {
            return Ok(f);
        }
        alpha *= 2.0;
    }
    Err(LinalgError::DecompositionFailed {
        attempts: MAX_SHIFT_RETRIES,
    })
}

fn try_ic0(s: &SparseSymMatrix, shift: f64) -> Option<IncompleteCholesky> {
    let n = s.dim();
    // Transpose the lower CSC into rows (column indices ascending, diagonal last).
    let mut counts = vec![0usize; n];
    for j in 0..n {
        for &i in s.col(j).0 {
            counts[i] += 1;
        }
    }
    let mut row_ptr = vec![0usize; n + 1];
    for i in 0..n {
        row_ptr[i + 1] = row_ptr[i] + counts[i];
    }
    let mut next = row_ptr.clone();
    let mut col_idx = vec![0usize; row_ptr[n]];
    let mut values = vec![0.0; row_ptr[n]];
    for j in 0..n {
        let (rows, vals) = s.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            col_idx[next[i]] = j;
            values[next[i]] = if i == j { v * (1.0 + shift) } else { v };
            next[i] += 1;
        }
    }

    let mut work = vec![0.0; n];
    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        for p in start..end {
            work[col_idx[p]] = values[p];
        }
        let mut diag = work[i];
        for p in start..end - 1 {
            let j = col_idx[p];
            let (js, je) = (row_ptr[j], row_ptr[j + 1]);
            let mut acc = work[j];
            for q in js..je - 1 {
                acc -= values[q] * work[col_idx[q]];
            }
            let lij = acc / values[je - 1];
            work[j] = lij;
            values[p] = lij;
            diag -= lij * lij;
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        values[end - 1] = diag.sqrt();
        for p in start..end {
            work[col_idx[p]] = 0.0;
        }
    }
    Some(IncompleteCholesky {
        row_ptr,
        col_idx,
        values,
        shift,
    })
}

impl IncompleteCholesky {
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Dense row-major `L`, for verification at small sizes.
    pub fn lower_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                l[i * n + self.col_idx[p]] = self.values[p];
            }
        }
        l
    }
}

impl Preconditioner for IncompleteCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.dim();
        z.copy_from_slice(r);
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = z[i];
            for p in s..e - 1 {
                acc -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.values[e - 1];
        }
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let zi = z[i] / self.values[e - 1];
            z[i] = zi;
            for p in s..e - 1 {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse_cholesky;

    fn dense_chol(a: &[f64], n: usize) -> Vec<f64> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            l[j * n + j] = d.sqrt();
            for i in j + 1..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / l[j * n + j];
            }
        }
        l
    }

    #[test]
    fn diagonal_matrix_is_exact() {
        let s = SparseSymMatrix::from_dense(3, &[4., 0., 0., 0., 9., 0., 0., 0., 16.]).unwrap();
        let ic = incomplete_cholesky(&s).unwrap();
        let mut z = vec![0.0; 3];
        ic.apply(&[4.0, 9.0, 16.0], &mut z);
        assert_eq!(z, vec![1.0, 1.0, 1.0]);
        let exact = sparse_cholesky(&s).unwrap().solve(&[4.0, 9.0, 16.0]);
        assert_eq!(z, exact);
    }

    #[test]
    fn tridiagonal_matches_exact_factor() {
        let n = 8;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 4.0 + i as f64 * 0.1;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let s = SparseSymMatrix::from_dense(n, &a).unwrap();
        let ic = incomplete_cholesky(&s).unwrap();
        assert_eq!(ic.shift(), 0.0);
        let exact = dense_chol(&a, n);
        for (x, y) in ic.lower_dense().iter().zip(&exact) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn breakdown_triggers_shift() {
        // Indefinite 2x2: no shift up to 8e-3 can fix it.
        let s = SparseSymMatrix::from_dense(2, &[1., 2., 2., 1.]).unwrap();
        assert!(matches!(
            incomplete_cholesky(&s),
            Err(LinalgError::DecompositionFailed { attempts: 3 })
        ));
        // Barely indefinite: the first shift rescues it.
        let s = SparseSymMatrix::from_dense(2, &[1., 1.0005, 1.0005, 1.]).unwrap();
        let ic = incomplete_cholesky(&s).unwrap();
        assert!(ic.shift() > 0.0);
    }
}
