//! Geometric descent.
//!
//! Each iteration shrinks the ball known to contain `x*` (via
//! [`ycompute`](crate::potential::ycompute)) and then takes the gradient step
//! `x - g/L` followed by an exact line search toward the new ball center.

use super::linesearch::{search_from, Reversed};
use super::{
    check_start, drive, Method, Snapshot, SolveResult, SolverError, SolverOptions, StepKind,
    StepReport,
};
use crate::linalg;
use crate::potential::{
    init_potential, stable_gamma_diff, update_sigma, ycompute, Branch, PotentialState,
};
use crate::problems::Objective;

/// Result of one geometric-descent step from `x`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GeometricStep {
    /// `x_next - x`.
    pub step: Vec<f64>,
    /// `y_next - x_next`.
    pub y_offset: Vec<f64>,
    /// `2 (f(x_next) - f(x)) / ell`.
    pub gamma_hat: f64,
    pub evaluations: usize,
}

/// Gradient step from `x`, then a line search along the segment from the
/// gradient point to the ball center `x + y_offset`.
pub(crate) fn geometric_step<P: Objective + ?Sized>(
    problem: &P,
    x: &[f64],
    g: &[f64],
    y_offset: &[f64],
    ls_tol: f64,
    max_inner: usize,
    iteration: usize,
) -> Result<GeometricStep, SolverError> {
    let inv_l = 1.0 / problem.big_l();
    let grad_step: Vec<f64> = g.iter().map(|gi| -gi * inv_l).collect();
    // Direction from x - g/L to y.
    let dir = linalg::sub(y_offset, &grad_step);
    let (step, y_next, evaluations) = if linalg::norm_sq(&dir) == 0.0 {
        (grad_step.clone(), dir, 1)
    } else {
        let origin = linalg::add(x, &grad_step);
        let mut line = problem.line(&origin, &dir);
        let (d0, c0) = line.derivatives(0.0);
        let (alpha, evaluations) = if d0 == 0.0 {
            (0.0, 1)
        } else {
            let ls = if d0 < 0.0 {
                search_from(line.as_mut(), d0, c0, ls_tol, max_inner)
            } else {
                search_from(&mut Reversed(line.as_mut()), -d0, c0, ls_tol, max_inner).map(
                    |mut r| {
                        r.alpha = -r.alpha;
                        r
                    },
                )
            }
            .map_err(|source| SolverError::LineSearch { iteration, source })?;
            if !ls.converged {
                log::debug!(
                    "iteration {iteration}: line search stopped at |phi'| = {:.3e}",
                    ls.slope.abs()
                );
            }
            (ls.alpha, ls.evaluations)
        };
        let step = linalg::lincomb(1.0, &grad_step, alpha, &dir);
        let y_next = dir.iter().map(|d| (1.0 - alpha) * d).collect();
        (step, y_next, evaluations)
    };
    let gamma_hat = stable_gamma_diff(problem, x, &step);
    Ok(GeometricStep {
        step,
        y_offset: y_next,
        gamma_hat,
        evaluations,
    })
}

pub struct GdState<'a, P: Objective + ?Sized> {
    problem: &'a P,
    x: Vec<f64>,
    g: Vec<f64>,
    f: f64,
    grad_norm: f64,
    potential: PotentialState,
    ls_tol: f64,
    max_inner: usize,
    last_branch: Option<Branch>,
}

impl<'a, P: Objective + ?Sized> GdState<'a, P> {
    pub fn new(problem: &'a P, x0: &[f64], options: &SolverOptions) -> Result<Self, SolverError> {
        check_start(problem.dim(), x0)?;
        let x = x0.to_vec();
        let mut g = vec![0.0; x.len()];
        let f = problem.value_and_gradient(&x, &mut g);
        let grad_norm = linalg::norm(&g);
        let potential = init_potential(grad_norm, problem.ell(), x.len()).map_err(|source| {
            SolverError::Potential {
                iteration: 0,
                source,
            }
        })?;
        Ok(Self {
            problem,
            x,
            g,
            f,
            grad_norm,
            potential,
            ls_tol: options.ls_tol,
            max_inner: options.max_inner,
            last_branch: None,
        })
    }

    /// Branch taken by the most recent ball update.
    pub fn last_branch(&self) -> Option<Branch> {
        self.last_branch
    }

    /// `y - x`.
    pub fn y_offset(&self) -> &[f64] {
        &self.potential.y_offset
    }
}

impl<P: Objective + ?Sized> Method for GdState<'_, P> {
    fn point(&self) -> &[f64] {
        &self.x
    }

    fn value(&self) -> f64 {
        self.f
    }

    fn grad_norm(&self) -> f64 {
        self.grad_norm
    }

    fn sigma_sq(&self) -> Option<f64> {
        Some(self.potential.sigma_sq)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            x: self.x.clone(),
            y: Some(linalg::add(&self.x, &self.potential.y_offset)),
        }
    }

    fn step(&mut self, iteration: usize) -> Result<StepReport, SolverError> {
        let ell = self.problem.ell();
        let yc = ycompute(
            &self.g,
            &self.potential.y_offset,
            self.potential.sigma_sq,
            ell,
        )
        .map_err(|source| SolverError::Potential { iteration, source })?;
        let gs = geometric_step(
            self.problem,
            &self.x,
            &self.g,
            &yc.y_offset,
            self.ls_tol,
            self.max_inner,
            iteration,
        )?;
        let sigma_sq = update_sigma(yc.xi_sq, gs.gamma_hat)
            .map_err(|source| SolverError::Potential { iteration, source })?;
        linalg::axpy(1.0, &gs.step, &mut self.x);
        self.f = self.problem.value_and_gradient(&self.x, &mut self.g);
        self.grad_norm = linalg::norm(&self.g);
        self.potential = PotentialState {
            sigma_sq,
            y_offset: gs.y_offset,
        };
        self.last_branch = Some(yc.branch);
        Ok(StepReport {
            kind: StepKind::Geometric,
            cost: gs.evaluations,
        })
    }
}

/// Geometric descent from `x0`.
pub fn gd_run<P: Objective + ?Sized>(
    problem: &P,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    let mut state = GdState::new(problem, x0, options)?;
    drive(&mut state, options)
}
