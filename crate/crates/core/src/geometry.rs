//! Intersection of two balls known to contain the minimizer.
//!
//! Given `B(x, rho)` and `B(y, sigma)` whose centers are at least `delta`
//! apart, every point of the intersection lies in a ball centered on the
//! segment `z = (1 - lambda) x + lambda y`. The radius of that ball is a
//! convex quadratic in `lambda`; [`optimal_ball`] picks its minimizer.
//!
//! All radii are carried squared. The potential that drives the solvers is a
//! squared quantity and square roots are only taken for reporting.

use thiserror::Error;

/// Relative slack below zero that is still treated as roundoff.
pub const NEGATIVE_SLACK: f64 = 1e-12;

/// Slack on `lambda` outside `[0, 1]` accepted (and clamped) in [`optimal_lambda`].
pub const LAMBDA_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{name} must be finite and nonnegative, got {value}")]
    InvalidRadius { name: &'static str, value: f64 },
    #[error("lambda = {0} lies outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("the balls do not intersect (radius squared evaluates to {0})")]
    EmptyIntersection(f64),
    #[error("centers coincide but the radii differ")]
    CoincidentCenters,
    #[error(
        "optimal-lambda precondition violated: delta^2 = {delta_sq} < |rho^2 - sigma^2| = {gap}"
    )]
    LambdaPrecondition { delta_sq: f64, gap: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Squared radii of the two balls and a squared lower bound on the distance
/// between their centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallPair {
    rho_sq: f64,
    sigma_sq: f64,
    delta_sq: f64,
}

fn check(name: &'static str, value: f64) -> Result<f64, GeometryError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(GeometryError::InvalidRadius { name, value })
    }
}

impl BallPair {
    pub fn from_radii(rho: f64, sigma: f64, delta: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            rho_sq: check("rho", rho)?.powi(2),
            sigma_sq: check("sigma", sigma)?.powi(2),
            delta_sq: check("delta", delta)?.powi(2),
        })
    }

    pub fn from_squared(rho_sq: f64, sigma_sq: f64, delta_sq: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            rho_sq: check("rho^2", rho_sq)?,
            sigma_sq: check("sigma^2", sigma_sq)?,
            delta_sq: check("delta^2", delta_sq)?,
        })
    }

    pub fn rho_sq(&self) -> f64 {
        self.rho_sq
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn delta_sq(&self) -> f64 {
        self.delta_sq
    }

    /// `rho + sigma >= delta`, i.e. the intersection can be nonempty.
    pub fn intersects(&self) -> bool {
        self.rho_sq.sqrt() + self.sigma_sq.sqrt() >= self.delta_sq.sqrt()
    }

    /// `delta^2 >= |rho^2 - sigma^2|`, which keeps the optimal lambda in `[0, 1]`.
    pub fn admits_optimal_lambda(&self) -> bool {
        self.delta_sq >= (self.rho_sq - self.sigma_sq).abs()
    }

    fn scale(&self) -> f64 {
        self.rho_sq.max(self.sigma_sq).max(self.delta_sq)
    }

    fn clamp_nonnegative(&self, value: f64) -> Result<f64, GeometryError> {
        if value >= 0.0 {
            Ok(value)
        } else if value >= -NEGATIVE_SLACK * self.scale() {
            Ok(0.0)
        } else {
            Err(GeometryError::EmptyIntersection(value))
        }
    }
}

/// Center parameter and squared radius of a ball enclosing `B(x, rho) ∩ B(y, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnclosingBall {
    pub lambda: f64,
    pub radius_sq: f64,
}

/// `(1 - lambda) rho^2 + lambda sigma^2 - lambda (1 - lambda) delta^2`.
pub fn combination_radius_sq(pair: &BallPair, lambda: f64) -> Result<f64, GeometryError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(GeometryError::LambdaOutOfRange(lambda));
    }
    let value = (1.0 - lambda) * pair.rho_sq + lambda * pair.sigma_sq
        - lambda * (1.0 - lambda) * pair.delta_sq;
    pair.clamp_nonnegative(value)
}

/// Minimizer of [`combination_radius_sq`] over `lambda`.
///
/// Coincident centers with equal radii return the midpoint `0.5`.
pub fn optimal_lambda(pair: &BallPair) -> Result<f64, GeometryError> {
    if pair.delta_sq == 0.0 {
        return if pair.rho_sq == pair.sigma_sq {
            Ok(0.5)
        } else {
            Err(GeometryError::CoincidentCenters)
        };
    }
    let lambda = (pair.delta_sq + pair.rho_sq - pair.sigma_sq) / (2.0 * pair.delta_sq);
    if !(-LAMBDA_SLACK..=1.0 + LAMBDA_SLACK).contains(&lambda) {
        return Err(GeometryError::LambdaPrecondition {
            delta_sq: pair.delta_sq,
            gap: (pair.rho_sq - pair.sigma_sq).abs(),
        });
    }
    Ok(lambda.clamp(0.0, 1.0))
}

/// Minimum over `lambda` of [`combination_radius_sq`]:
/// `(2 rho^2 + 2 sigma^2 - delta^2 - (rho^2 - sigma^2)^2 / delta^2) / 4`.
pub fn optimal_radius_sq(pair: &BallPair) -> Result<f64, GeometryError> {
    Ok(optimal_ball(pair)?.radius_sq)
}

pub fn optimal_ball(pair: &BallPair) -> Result<EnclosingBall, GeometryError> {
    let lambda = optimal_lambda(pair)?;
    if pair.delta_sq == 0.0 {
        return Ok(EnclosingBall {
            lambda,
            radius_sq: pair.rho_sq,
        });
    }
    let gap = pair.rho_sq - pair.sigma_sq;
    let value = 0.25
        * (2.0 * pair.rho_sq + 2.0 * pair.sigma_sq - pair.delta_sq - gap * gap / pair.delta_sq);
    Ok(EnclosingBall {
        lambda,
        radius_sq: pair.clamp_nonnegative(value)?,
    })
}

/// `(1 - lambda) x + lambda y`.
pub fn enclosing_center(x: &[f64], y: &[f64], lambda: f64) -> Result<Vec<f64>, GeometryError> {
    if x.len() != y.len() {
        return Err(GeometryError::DimensionMismatch(x.len(), y.len()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(GeometryError::LambdaOutOfRange(lambda));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
        .collect())
}
