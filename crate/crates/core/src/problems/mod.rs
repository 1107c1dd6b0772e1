//! Objective functions.
//!
//! Every solver talks to a problem through [`Objective`]: values, gradients,
//! exact Hessian-vector products, the strong-convexity pair `(ell, L)`, and a
//! one-dimensional restriction used by the line search.

mod abpdn;
mod hinge;
mod quadratic;
pub mod rng;
mod screened;

pub use abpdn::{first_primes, Abpdn, DctRows, ABPDN_LAMBDA};
pub use hinge::{hinge_diff, hinge_h, HingeData, HingeLoss, DEFAULT_NOISE_SIGMA};
pub use quadratic::Quadratic;
pub use screened::{ScreenStats, ScreenedHinge};

use crate::linalg::{self, CompensatedSum};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("size {0} is not a power of 4")]
    NotPowerOfFour(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// `phi(alpha) = f(origin + alpha * dir)` for fixed `origin` and `dir`.
///
/// Implementations may precompute whatever makes repeated evaluations cheap
/// (products with the origin and direction, say).
pub trait LineRestriction {
    /// `(phi'(alpha), phi''(alpha))`.
    fn derivatives(&mut self, alpha: f64) -> (f64, f64);

    /// `phi(alpha) - phi(0)`, accurate to relative precision even when
    /// `alpha * |dir|` is tiny compared with `|origin|`.
    fn value_change(&mut self, alpha: f64) -> f64;
}

pub trait Objective {
    fn dim(&self) -> usize;

    /// Strong-convexity modulus.
    fn ell(&self) -> f64;

    /// Lipschitz constant of the gradient.
    fn big_l(&self) -> f64;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], g: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Writes the gradient into `g` and returns the value.
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        self.gradient_into(x, g);
        self.value(x)
    }

    /// `out = Hess f(x) d`.
    fn hessian_vec_into(&self, x: &[f64], d: &[f64], out: &mut [f64]);

    fn hessian_vec(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.hessian_vec_into(x, d, &mut out);
        out
    }

    /// `f(x + s) - f(x)`.
    ///
    /// The default subtracts the two values; problems override it with a form
    /// whose relative error does not blow up as `s -> 0`.
    fn value_difference(&self, x: &[f64], s: &[f64]) -> f64 {
        let xs = linalg::add(x, s);
        let mut acc = CompensatedSum::new();
        acc.add(self.value(&xs));
        acc.add(-self.value(x));
        acc.total()
    }

    fn line<'a>(&'a self, origin: &'a [f64], dir: &'a [f64]) -> Box<dyn LineRestriction + 'a> {
        Box::new(GenericLine::new(self, origin, dir))
    }

    /// The minimizer, when it can be computed directly.
    fn exact_minimizer(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Line restriction built from full gradient and Hessian-vector calls.
pub struct GenericLine<'a, P: Objective + ?Sized> {
    problem: &'a P,
    origin: &'a [f64],
    dir: &'a [f64],
    point: Vec<f64>,
    grad: Vec<f64>,
    hd: Vec<f64>,
}

impl<'a, P: Objective + ?Sized> GenericLine<'a, P> {
    pub fn new(problem: &'a P, origin: &'a [f64], dir: &'a [f64]) -> Self {
        let n = problem.dim();
        Self {
            problem,
            origin,
            dir,
            point: vec![0.0; n],
            grad: vec![0.0; n],
            hd: vec![0.0; n],
        }
    }

    fn move_to(&mut self, alpha: f64) {
        for ((p, o), d) in self.point.iter_mut().zip(self.origin).zip(self.dir) {
            *p = o + alpha * d;
        }
    }
}

impl<P: Objective + ?Sized> LineRestriction for GenericLine<'_, P> {
    fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
        self.move_to(alpha);
        self.problem.gradient_into(&self.point, &mut self.grad);
        self.problem
            .hessian_vec_into(&self.point, self.dir, &mut self.hd);
        (
            linalg::dot(&self.grad, self.dir),
            linalg::dot(&self.hd, self.dir),
        )
    }

    fn value_change(&mut self, alpha: f64) -> f64 {
        let step: Vec<f64> = self.dir.iter().map(|d| alpha * d).collect();
        self.problem.value_difference(self.origin, &step)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), ProblemError> {
    if expected == got {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch { expected, got })
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration, stopped when successive Rayleigh quotients agree to `rel_tol`.
pub fn power_iteration<F>(n: usize, mut apply: F, rel_tol: f64, max_iter: usize) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    // Deterministic start with no special alignment to any structured eigenvector.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64) * 0.618_033_988_75).fract())
        .collect();
    let nv = linalg::norm(&v);
    linalg::scale(1.0 / nv, &mut v);
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        apply(&v, &mut w);
        let rayleigh = linalg::dot(&v, &w);
        let nw = linalg::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if (rayleigh - estimate).abs() <= rel_tol * rayleigh.abs() {
            return rayleigh.max(nw);
        }
        estimate = rayleigh;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_on_diagonal() {
        let diag = [1.0, 3.0, 10.0, 2.0];
        let top = power_iteration(
            4,
            |v, w| {
                for i in 0..4 {
                    w[i] = diag[i] * v[i];
                }
            },
            1e-12,
            10_000,
        );
        assert!((top - 10.0).abs() < 1e-9);
    }
}
