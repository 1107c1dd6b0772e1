//! Exact line search by safeguarded Newton iteration on `phi'(alpha) = 0`.
//!
//! Starting from `alpha = 0` with `phi'(0) < 0`, every evaluation narrows a
//! bracket `[lo, hi]` with `phi'(lo) < 0 < phi'(hi)` (`hi` may still be
//! infinite). A Newton trial outside the bracket is replaced by bisection, or
//! by doubling while no upper end is known.

use crate::problems::{LineRestriction, Objective};
use thiserror::Error;

/// Cap on consecutive bracket doublings.
pub const MAX_EXPANSIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineSearchError {
    #[error("not a descent direction: phi'(0) = {0}")]
    NonDescent(f64),
    #[error("no sign change of phi' after {MAX_EXPANSIONS} doublings (alpha = {0})")]
    Unbounded(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    /// Derivative evaluations, including the one at `alpha = 0`.
    pub evaluations: usize,
    pub converged: bool,
    /// `phi'(alpha)`.
    pub slope: f64,
    /// `phi'(0)`.
    pub initial_slope: f64,
}

/// Searches along `dir` from `origin` until `|phi'(alpha)| <= ls_tol |phi'(0)|`.
pub fn line_search<P: Objective + ?Sized>(
    problem: &P,
    origin: &[f64],
    dir: &[f64],
    ls_tol: f64,
    max_inner: usize,
) -> Result<LineSearchResult, LineSearchError> {
    let mut line = problem.line(origin, dir);
    search(line.as_mut(), ls_tol, max_inner)
}

/// Same as [`line_search`] on an already constructed restriction.
pub fn search(
    line: &mut dyn LineRestriction,
    ls_tol: f64,
    max_inner: usize,
) -> Result<LineSearchResult, LineSearchError> {
    let (d0, c0) = line.derivatives(0.0);
    search_from(line, d0, c0, ls_tol, max_inner)
}

/// [`search`] with `(phi'(0), phi''(0))` already evaluated by the caller.
/// That evaluation is still counted.
pub fn search_from(
    line: &mut dyn LineRestriction,
    d0: f64,
    c0: f64,
    ls_tol: f64,
    max_inner: usize,
) -> Result<LineSearchResult, LineSearchError> {
    if !(d0 < 0.0) {
        return Err(LineSearchError::NonDescent(d0));
    }
    let target = ls_tol * d0.abs();
    let mut evaluations = 1;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut best = (0.0, d0);
    let mut expansions = 0;
    let mut alpha = if c0 > 0.0 && c0.is_finite() {
        -d0 / c0
    } else {
        1.0
    };

    while evaluations < max_inner.max(1) {
        let (d, c) = line.derivatives(alpha);
        evaluations += 1;
        if !d.is_finite() {
            // Overflow far out along the line: treat as past the minimizer.
            hi = alpha;
            alpha = 0.5 * (lo + hi);
            continue;
        }
        if d.abs() < best.1.abs() {
            best = (alpha, d);
        }
        if d.abs() <= target {
            return Ok(LineSearchResult {
                alpha,
                evaluations,
                converged: true,
                slope: d,
                initial_slope: d0,
            });
        }
        if d > 0.0 {
            hi = alpha;
        } else {
            lo = alpha;
        }
        let newton = if c > 0.0 { alpha - d / c } else { f64::NAN };
        let next = if hi.is_finite() {
            if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            }
        } else if newton.is_finite() && newton > lo {
            expansions = 0;
            newton
        } else {
            expansions += 1;
            if expansions > MAX_EXPANSIONS {
                return Err(LineSearchError::Unbounded(alpha));
            }
            2.0 * alpha.max(lo).max(f64::MIN_POSITIVE)
        };
        if next == alpha || (hi.is_finite() && hi - lo <= f64::EPSILON * hi.abs()) {
            // The bracket cannot shrink any further in floating point.
            break;
        }
        alpha = next;
    }
    Ok(LineSearchResult {
        alpha: best.0,
        evaluations,
        converged: false,
        slope: best.1,
        initial_slope: d0,
    })
}

/// `phi(-alpha)`, turning an ascent direction into a descent direction.
pub struct Reversed<'a>(pub &'a mut dyn LineRestriction);

impl LineRestriction for Reversed<'_> {
    fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
        let (d, c) = self.0.derivatives(-alpha);
        (-d, c)
    }

    fn value_change(&mut self, alpha: f64) -> f64 {
        self.0.value_change(-alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    /// `phi(alpha) = (alpha - 1)^4`.
    struct Quartic;

    impl LineRestriction for Quartic {
        fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
            let t = alpha - 1.0;
            (4.0 * t * t * t, 12.0 * t * t)
        }

        fn value_change(&mut self, alpha: f64) -> f64 {
            (alpha - 1.0).powi(4) - 1.0
        }
    }

    /// Scalar reference: plain Newton on `4 t^3` from 0 contracts the error by 2/3.
    fn reference_quartic_iterations(tol: f64) -> usize {
        let mut alpha: f64 = 0.0;
        let mut k = 1;
        while (4.0 * (alpha - 1.0).powi(3)).abs() > tol * 4.0 {
            alpha -= (alpha - 1.0) / 3.0;
            k += 1;
        }
        k
    }

    #[test]
    fn quadratic_in_one_newton_step() {
        let q = Quadratic::random_spd(5, 10.0, 2).unwrap();
        let x = vec![0.0; 5];
        let g = q.gradient(&x);
        let dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let r = line_search(&q, &x, &dir, 1e-12, 50).unwrap();
        assert!(r.converged);
        assert_eq!(r.evaluations, 2);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let gag: f64 = q
            .hessian_vec(&x, &g)
            .iter()
            .zip(&g)
            .map(|(a, b)| a * b)
            .sum();
        assert!((r.alpha - gg / gag).abs() < 1e-12 * r.alpha);
    }

    #[test]
    fn quartic_converges_within_sixty() {
        let r = search(&mut Quartic, 1e-24, 60).unwrap();
        assert!(r.converged);
        assert!((r.alpha - 1.0).abs() <= 1e-8, "alpha = {}", r.alpha);
        assert!(r.evaluations <= 60);
        assert_eq!(r.evaluations, reference_quartic_iterations(1e-24));
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let q = Quadratic::random_spd(5, 10.0, 2).unwrap();
        let x = vec![0.0; 5];
        let g = q.gradient(&x);
        assert!(matches!(
            line_search(&q, &x, &g, 1e-8, 50),
            Err(LineSearchError::NonDescent(_))
        ));
    }

    /// `phi'` is a steep sigmoid, where raw Newton overshoots badly.
    struct Sigmoid;

    impl LineRestriction for Sigmoid {
        fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
            let t = 5.0 * (alpha - 3.0);
            (t.tanh(), 5.0 / t.cosh().powi(2))
        }

        fn value_change(&mut self, alpha: f64) -> f64 {
            let t = |a: f64| (5.0 * (a - 3.0)).cosh().ln() / 5.0;
            t(alpha) - t(0.0)
        }
    }

    #[test]
    fn safeguard_handles_overshoot() {
        let r = search(&mut Sigmoid, 1e-10, 200).unwrap();
        assert!(r.converged);
        assert!((r.alpha - 3.0).abs() < 1e-9);
    }

    #[test]
    fn cap_returns_best_point() {
        let r = search(&mut Quartic, 1e-30, 5).unwrap();
        assert!(!r.converged);
        assert_eq!(r.evaluations, 5);
        assert!(r.alpha > 0.5 && r.alpha < 1.0);
    }
}
