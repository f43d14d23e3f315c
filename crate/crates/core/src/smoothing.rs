//! Huber smoothing of the plus function `max(t, 0)`.
//!
//! ```text
//!            | t - |eps|/2        t >= |eps|
//! h(eps, t) =| t^2 / (2 |eps|)    0 < t < |eps|
//!            | 0                  t <= 0
//! ```
//!
//! with `h(0, t) = max(t, 0)`. Unlike CHKS-type smoothings, `h(eps, t) = 0`
//! for every `t <= 0`, so the smoothed projection keeps the zero pattern of
//! the exact projection and the Newton matrices inherit the sparsity of
//! the transport plan.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SmoothingError {
    #[error("derivative of the Huber function requested at eps = 0")]
    ZeroSmoothing,
}

/// Diagonal Jacobians of `Phi(eps, w)` with respect to `eps` (`v1`) and `w` (`v2`).
#[derive(Debug, Clone, PartialEq)]
pub struct HuberJacobians {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

#[inline]
pub fn huber_eval(eps: f64, t: f64) -> f64 {
    let e = eps.abs();
    if t <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * e;
    let mut h = if t >= e { t - half } else { t * t / (2.0 * e) };
    // Rounding may push the computed gap `t - h` past `|eps|/2` by an ulp.
    while t - h > half {
        h = h.next_up();
    }
    h
}

/// `dh/dt` for `eps != 0`.
pub fn huber_dt(eps: f64, t: f64) -> Result<f64, SmoothingError> {
    if eps == 0.0 {
        return Err(SmoothingError::ZeroSmoothing);
    }
    Ok(dt_unchecked(eps.abs(), t))
}

/// `dh/deps` for `eps != 0`.
pub fn huber_deps(eps: f64, t: f64) -> Result<f64, SmoothingError> {
    if eps == 0.0 {
        return Err(SmoothingError::ZeroSmoothing);
    }
    Ok(deps_unchecked(eps, t))
}

#[inline]
pub(crate) fn dt_unchecked(abs_eps: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= abs_eps {
        1.0
    } else {
        t / abs_eps
    }
}

#[inline]
pub(crate) fn deps_unchecked(eps: f64, t: f64) -> f64 {
    let e = eps.abs();
    if t <= 0.0 {
        0.0
    } else if t >= e {
        -0.5 * eps.signum()
    } else {
        -(t * t) / (2.0 * eps * eps) * eps.signum()
    }
}

/// Elementwise `h(eps, w_i)`; equals the projection onto the nonnegative
/// orthant when `eps = 0`.
pub fn phi_map(eps: f64, w: &[f64]) -> Vec<f64> {
    w.iter().map(|&t| huber_eval(eps, t)).collect()
}

/// Elementwise partial derivatives of `Phi` at `(eps, w)`, `eps > 0`.
pub fn phi_jacobians(eps: f64, w: &[f64]) -> Result<HuberJacobians, SmoothingError> {
    if !(eps > 0.0) {
        return Err(SmoothingError::ZeroSmoothing);
    }
    Ok(HuberJacobians {
        v1: w.iter().map(|&t| deps_unchecked(eps, t)).collect(),
        v2: w.iter().map(|&t| dt_unchecked(eps, t)).collect(),
    })
}
