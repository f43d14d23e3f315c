use super::LinalgError;

/// Symmetric matrix stored as the lower triangle in compressed sparse column form.
///
/// Every column starts with its diagonal entry; the remaining row indices of a
/// column are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds a matrix from `(row, col, value)` triplets given in either triangle.
    ///
    /// Entries `(i, j)` and `(j, i)` address the same stored element and are
    /// summed. Every diagonal entry must be present (an explicit zero is fine).
    pub fn from_triplets(
        dim: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let mut counts = vec![0usize; dim];
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(LinalgError::IndexOutOfBounds {
                    index: i.max(j),
                    dim,
                });
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
            counts[i.min(j)] += 1;
        }
        let mut col_ptr = vec![0usize; dim + 1];
        for j in 0..dim {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let mut next = col_ptr.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }

        // Sort each column and merge duplicates.
        let mut out_ptr = vec![0usize; dim + 1];
        let mut out_rows = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..dim {
            scratch.clear();
            scratch.extend((col_ptr[j]..col_ptr[j + 1]).map(|p| (rows[p], vals[p])));
            scratch.sort_unstable_by_key(|e| e.0);
            if scratch.first().map(|e| e.0) != Some(j) {
                return Err(LinalgError::MissingDiagonal(j));
            }
            for &(r, v) in scratch.iter() {
                if out_rows.len() > out_ptr[j] && *out_rows.last().unwrap() == r {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_rows.push(r);
                    out_vals.push(v);
                }
            }
            out_ptr[j + 1] = out_rows.len();
        }
        Ok(Self {
            dim,
            col_ptr: out_ptr,
            row_idx: out_rows,
            values: out_vals,
        })
    }

    /// Builds a matrix from a dense row-major array, keeping nonzero entries
    /// of the lower triangle and every diagonal entry.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Result<Self, LinalgError> {
        if dense.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim * dim,
                found: dense.len(),
            });
        }
        let mut trip = Vec::new();
        for j in 0..dim {
            for i in j..dim {
                let v = dense[i * dim + j];
                if i == j || v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dim, &trip)
    }

    pub(crate) fn from_sorted_parts(
        dim: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(col_ptr.len(), dim + 1);
        debug_assert!((0..dim).all(|j| row_idx[col_ptr[j]] == j));
        Self {
            dim,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries (lower triangle including the diagonal).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j` of the lower triangle.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| self.values[self.col_ptr[j]])
            .collect()
    }

    /// `y = S x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.dim {
            let (rows, vals) = self.col(j);
            let xj = x[j];
            y[j] += vals[0] * xj;
            let mut acc = 0.0;
            for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                y[i] += v * xj;
                acc += v * x[i];
            }
            y[j] += acc;
        }
    }

    /// Dense row-major copy of the full symmetric matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut d = vec![0.0; n * n];
        for j in 0..n {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// Full symmetric pattern (both triangles, no values) in CSC form.
    pub(crate) fn full_pattern(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.dim;
        let mut counts = vec![0usize; n];
        for j in 0..n {
            let (rows, _) = self.col(j);
            counts[j] += rows.len();
            for &i in &rows[1..] {
                counts[i] += 1;
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for j in 0..n {
            ptr[j + 1] = ptr[j] + counts[j];
        }
        let mut next = ptr.clone();
        let mut idx = vec![0usize; ptr[n]];
        for j in 0..n {
            let (rows, _) = self.col(j);
            for &i in rows {
                idx[next[j]] = i;
                next[j] += 1;
                if i != j {
                    idx[next[i]] = j;
                    next[i] += 1;
                }
            }
        }
        for j in 0..n {
            idx[ptr[j]..ptr[j + 1]].sort_unstable();
        }
        (ptr, idx)
    }
}

/// General `rows x cols` sparse matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Keeps the nonzero entries of a column-major dense array.
    pub fn from_col_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        let mut col_ptr = Vec::with_capacity(cols + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..cols {
            for (i, &v) in data[j * rows..(j + 1) * rows].iter().enumerate() {
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= rows || j >= cols {
                return Err(LinalgError::IndexOutOfBounds {
                    index: if i >= rows { i } else { j },
                    dim: if i >= rows { rows } else { cols },
                });
            }
        }
        sorted.sort_unstable_by_key(|&(i, j, _)| (j, i));
        let mut col_ptr = vec![0usize; cols + 1];
        let mut row_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(i);
                values.push(v);
                col_ptr[j + 1] += 1;
                last = Some((i, j));
            }
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    /// Iterates over stored `(row, col, value)` entries in column order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }
}
