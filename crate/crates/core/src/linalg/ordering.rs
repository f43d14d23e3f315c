use super::{LinalgError, SparseSymMatrix};

/// Approximate minimum degree ordering of a symmetric matrix.
///
/// Returns `perm` with `perm[new] = old`.
pub fn amd_ordering(s: &SparseSymMatrix) -> Result<Vec<usize>, LinalgError> {
    let n = s.dim();
    if n <= 2 {
        return Ok((0..n).collect());
    }
    let (ptr, idx) = s.full_pattern();
    let control = amd::Control::default();
    let (perm, _, _) =
        amd::order::<usize>(n, &ptr, &idx, &control).map_err(|_| LinalgError::OrderingFailed)?;
    debug_assert_eq!(perm.len(), n);
    Ok(perm)
}
