//! Nonlinear conjugate gradient with the Hager–Zhang `beta` and an exact line search.

use super::hyncg::hz_beta;
use super::linesearch::line_search;
use super::{
    check_start, drive, Method, Snapshot, SolveResult, SolverError, SolverOptions, StepKind,
    StepReport,
};
use crate::linalg;
use crate::problems::Objective;

pub struct NcgState<'a, P: Objective + ?Sized> {
    problem: &'a P,
    x: Vec<f64>,
    g: Vec<f64>,
    g_prev: Option<Vec<f64>>,
    p: Vec<f64>,
    f: f64,
    grad_norm: f64,
    ls_tol: f64,
    max_inner: usize,
}

impl<'a, P: Objective + ?Sized> NcgState<'a, P> {
    pub fn new(problem: &'a P, x0: &[f64], options: &SolverOptions) -> Result<Self, SolverError> {
        check_start(problem.dim(), x0)?;
        let x = x0.to_vec();
        let mut g = vec![0.0; x.len()];
        let f = problem.value_and_gradient(&x, &mut g);
        Ok(Self {
            problem,
            grad_norm: linalg::norm(&g),
            p: vec![0.0; x.len()],
            x,
            g,
            g_prev: None,
            f,
            ls_tol: options.ls_tol,
            max_inner: options.max_inner,
        })
    }

    /// Direction of the most recent step.
    pub fn direction(&self) -> &[f64] {
        &self.p
    }
}

impl<P: Objective + ?Sized> Method for NcgState<'_, P> {
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
        None
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            x: self.x.clone(),
            y: None,
        }
    }

    fn step(&mut self, iteration: usize) -> Result<StepReport, SolverError> {
        let first = self.g_prev.is_none();
        let beta = self
            .g_prev
            .as_ref()
            .and_then(|gp| hz_beta(&linalg::sub(&self.g, gp), &self.p, &self.g));
        let kind = match beta {
            _ if first => StepKind::Nonlinear,
            Some(beta) => {
                linalg::axpby(-1.0, &self.g, beta, &mut self.p);
                if linalg::dot(&self.p, &self.g) < 0.0 {
                    StepKind::Nonlinear
                } else {
                    StepKind::Restart
                }
            }
            None => StepKind::Restart,
        };
        if first || kind == StepKind::Restart {
            self.p.iter_mut().zip(&self.g).for_each(|(p, g)| *p = -g);
        }
        let ls = line_search(self.problem, &self.x, &self.p, self.ls_tol, self.max_inner)
            .map_err(|source| SolverError::LineSearch { iteration, source })?;
        if !ls.converged {
            log::debug!(
                "iteration {iteration}: line search stopped at |phi'| = {:.3e}",
                ls.slope.abs()
            );
        }
        linalg::axpy(ls.alpha, &self.p, &mut self.x);
        let g_old = std::mem::replace(&mut self.g, vec![0.0; self.x.len()]);
        self.g_prev = Some(g_old);
        self.f = self.problem.value_and_gradient(&self.x, &mut self.g);
        self.grad_norm = linalg::norm(&self.g);
        Ok(StepReport {
            kind,
            cost: ls.evaluations,
        })
    }
}

/// Hager–Zhang nonlinear CG from `x0`.
pub fn ncg_run<P: Objective + ?Sized>(
    problem: &P,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    let mut state = NcgState::new(problem, x0, options)?;
    drive(&mut state, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;
    use crate::solvers::CgState;

    #[test]
    fn matches_linear_cg_on_quadratic() {
        let q = Quadratic::random_spd(30, 100.0, 11).unwrap();
        let x0 = vec![0.0; 30];
        let opts = SolverOptions {
            ls_tol: 1e-14,
            ..SolverOptions::default()
        };
        let mut ncg = NcgState::new(&q, &x0, &opts).unwrap();
        let mut cg = CgState::new(&q, &x0).unwrap();
        for k in 1..=10 {
            let kind = ncg.step(k).unwrap().kind;
            assert_eq!(kind, StepKind::Nonlinear);
            cg.step(k).unwrap();
            let scale = linalg::norm(cg.point()).max(1.0);
            assert!(
                linalg::dist_sq(ncg.point(), cg.point()).sqrt() <= 1e-8 * scale,
                "k = {k}"
            );
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let q = Quadratic::random_spd(20, 1e3, 2).unwrap();
        let r = ncg_run(&q, &[1.0; 20], &SolverOptions::with_tol(1e-9)).unwrap();
        assert!(r.converged);
        assert!(r.iterations >= r.outer_iterations);
    }
}
