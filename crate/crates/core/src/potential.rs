//! The computable potential.
//!
//! The potential is a squared radius `sigma~^2 = sigma^2 + gamma` where
//! `sigma` bounds `|y - x*|` and `gamma = 2 (f(x) - f*) / ell` is unknown but
//! only ever changes by computable amounts `2 (f(x_k) - f(x_{k-1})) / ell`.
//! Nothing here reads `x*` or `f*`.
//!
//! `y` is carried as the offset `y - x`; the absolute position is never needed
//! and subtracting nearly equal positions would lose digits near convergence.

use crate::geometry::{self, BallPair, GeometryError};
use crate::linalg;
use crate::problems::Objective;
use thiserror::Error;

/// Relative slack on the conditions selecting the shrink branch.
pub const BRANCH_SLACK: f64 = 1e-10;

/// Relative amount by which `xi^2 + gamma_hat` may fall below zero before
/// [`update_sigma`] reports an error instead of clamping.
pub const UPDATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("ell must be positive and finite, got {0}")]
    InvalidEll(f64),
    #[error("gradient is zero: the iterate is already optimal")]
    ZeroGradient,
    #[error("potential update went negative: xi^2 = {xi_sq}, gamma_hat = {gamma}")]
    NegativeUpdate { xi_sq: f64, gamma: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    pub sigma_sq: f64,
    /// `y_k - x_k`.
    pub y_offset: Vec<f64>,
}

/// `sigma~_0^2 = 2 |g_0|^2 / ell^2` with `y_0 = x_0`.
pub fn init_potential(
    grad0_norm: f64,
    ell: f64,
    dim: usize,
) -> Result<PotentialState, PotentialError> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(PotentialError::InvalidEll(ell));
    }
    Ok(PotentialState {
        sigma_sq: 2.0 * grad0_norm * grad0_norm / (ell * ell),
        y_offset: vec![0.0; dim],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Intersect the two balls.
    Shrink,
    /// The ball around `x - g/ell` alone is smaller.
    ResetToOobx,
    /// Geometric conditions failed (inexact line search); keep `y` and sigma.
    KeepPrevious,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YComputeResult {
    /// New `y` as an offset from the previous `x`.
    pub y_offset: Vec<f64>,
    pub xi_sq: f64,
    pub lambda: f64,
    pub branch: Branch,
}

/// Combines the ball around `x - g/ell` (radius^2 `|g|^2 / ell^2`) with the
/// previous ball around `y` (radius^2 `sigma_sq`), both in `gamma`-shifted
/// form, into the next `y` and `xi^2`.
pub fn ycompute(
    g: &[f64],
    y_offset: &[f64],
    sigma_sq: f64,
    ell: f64,
) -> Result<YComputeResult, PotentialError> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(PotentialError::InvalidEll(ell));
    }
    let g_sq = linalg::norm_sq(g);
    if g_sq == 0.0 {
        return Err(PotentialError::ZeroGradient);
    }
    let rho_sq = g_sq / (ell * ell);
    let (lambda, xi_sq, branch) = if sigma_sq <= 2.0 * rho_sq {
        let delta_sq: f64 = y_offset
            .iter()
            .zip(g)
            .map(|(y, gi)| (y + gi / ell).powi(2))
            .sum();
        let far_enough = delta_sq >= rho_sq * (1.0 - BRANCH_SLACK);
        let balanced = rho_sq >= (rho_sq - sigma_sq).abs() * (1.0 - BRANCH_SLACK);
        let pair = BallPair::from_squared(rho_sq, sigma_sq, delta_sq)?;
        match geometry::optimal_ball(&pair) {
            Ok(ball) if far_enough && balanced => (ball.lambda, ball.radius_sq, Branch::Shrink),
            Ok(_) => (1.0, sigma_sq, Branch::KeepPrevious),
            Err(e) => {
                // Disjoint balls: one of the two bounds has been lost to roundoff.
                log::debug!("ball update skipped: {e}");
                (1.0, sigma_sq, Branch::KeepPrevious)
            }
        }
    } else {
        (0.0, rho_sq, Branch::ResetToOobx)
    };
    let y_next = y_offset
        .iter()
        .zip(g)
        .map(|(y, gi)| -(1.0 - lambda) * gi / ell + lambda * y)
        .collect();
    Ok(YComputeResult {
        y_offset: y_next,
        xi_sq,
        lambda,
        branch,
    })
}

/// `2 (f(x + s) - f(x)) / ell` through the problem's cancellation-free difference.
pub fn stable_gamma_diff<P: Objective + ?Sized>(problem: &P, x: &[f64], step: &[f64]) -> f64 {
    2.0 * problem.value_difference(x, step) / problem.ell()
}

/// `max(0, xi^2 + gamma_hat)`, rejecting values that are negative beyond roundoff.
pub fn update_sigma(xi_sq: f64, gamma_hat: f64) -> Result<f64, PotentialError> {
    let v = xi_sq + gamma_hat;
    if v >= 0.0 {
        Ok(v)
    } else if v >= -UPDATE_SLACK * xi_sq.max(gamma_hat.abs()).max(1.0) {
        Ok(0.0)
    } else {
        Err(PotentialError::NegativeUpdate {
            xi_sq,
            gamma: gamma_hat,
        })
    }
}
