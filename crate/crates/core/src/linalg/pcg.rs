use super::{dot, norm2, LinalgError, LinearOperator, Preconditioner};

#[derive(Debug, Clone, PartialEq)]
pub struct PcgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once `||A x - b|| <= tol * (1 + ||b||)`. After `max_iter` steps
/// without meeting the tolerance, returns [`LinalgError::NotConverged`]
/// carrying the last iterate, which minimizes the energy norm of the error
/// over the Krylov space built so far.
pub fn pcg(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: Option<&dyn Preconditioner>,
    tol: f64,
    max_iter: usize,
) -> Result<PcgSolution, LinalgError> {
    let n = op.dim();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let target = tol * (1.0 + norm2(b));
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(PcgSolution {
            x,
            iterations: 0,
            residual_norm: rnorm,
        });
    }
    let mut z = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64]| match precond {
        Some(m) => m.apply(r, z),
        None => z.copy_from_slice(r),
    };
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // Breakdown: the operator is not positive definite along p (or p = 0).
            return Err(LinalgError::NotConverged {
                best: x,
                iterations: it - 1,
                residual: rnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= target {
            return Ok(PcgSolution {
                x,
                iterations: it,
                residual_norm: rnorm,
            });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NotConverged {
        best: x,
        iterations: max_iter,
        residual: rnorm,
    })
}
