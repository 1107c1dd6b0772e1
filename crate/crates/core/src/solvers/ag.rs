//! Accelerated gradient with the constant momentum `theta = (sqrt(kappa) - 1) / (sqrt(kappa) + 1)`.
//!
//! All step lengths are fixed, so each outer iteration costs one gradient.
//! The potential is carried alongside for traces only; it never steers the
//! iteration.

use super::{
    check_start, drive, Method, Snapshot, SolveResult, SolverError, SolverOptions, StepKind,
    StepReport,
};
use crate::linalg;
use crate::potential::init_potential;
use crate::problems::Objective;

pub struct AgState<'a, P: Objective + ?Sized> {
    problem: &'a P,
    theta: f64,
    tau: f64,
    sqrt_kappa: f64,
    x: Vec<f64>,
    /// `x_k - x_{k-1}`, zero at the start.
    dx: Vec<f64>,
    w: Vec<f64>,
    g_w: Vec<f64>,
    f_w: f64,
    grad_norm_w: f64,
    f_x: f64,
    sigma_sq: f64,
}

impl<'a, P: Objective + ?Sized> AgState<'a, P> {
    pub fn new(problem: &'a P, x0: &[f64]) -> Result<Self, SolverError> {
        check_start(problem.dim(), x0)?;
        let kappa = problem.big_l() / problem.ell();
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(SolverError::InvalidOptions(format!(
                "condition number {kappa} is not >= 1"
            )));
        }
        let sqrt_kappa = kappa.sqrt();
        let x = x0.to_vec();
        let mut g_w = vec![0.0; x.len()];
        let f_w = problem.value_and_gradient(&x, &mut g_w);
        let grad_norm_w = linalg::norm(&g_w);
        let sigma_sq = init_potential(grad_norm_w, problem.ell(), 0)
            .map_err(|source| SolverError::Potential {
                iteration: 0,
                source,
            })?
            .sigma_sq;
        Ok(Self {
            problem,
            theta: (sqrt_kappa - 1.0) / (sqrt_kappa + 1.0),
            tau: sqrt_kappa - 1.0,
            sqrt_kappa,
            dx: vec![0.0; x.len()],
            w: x.clone(),
            x,
            g_w,
            f_w,
            grad_norm_w,
            f_x: f_w,
            sigma_sq,
        })
    }

    /// `x_k`; the method terminates on the gradient at `w_k` instead.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn f_x(&self) -> f64 {
        self.f_x
    }

    /// `y_k = x_k + tau (x_k - x_{k-1})`.
    pub fn y(&self) -> Vec<f64> {
        linalg::lincomb(1.0, &self.x, self.tau, &self.dx)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl<P: Objective + ?Sized> Method for AgState<'_, P> {
    fn point(&self) -> &[f64] {
        &self.w
    }

    fn value(&self) -> f64 {
        self.f_w
    }

    fn grad_norm(&self) -> f64 {
        self.grad_norm_w
    }

    fn sigma_sq(&self) -> Option<f64> {
        Some(self.sigma_sq)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            x: self.x.clone(),
            y: Some(self.y()),
        }
    }

    fn step(&mut self, _iteration: usize) -> Result<StepReport, SolverError> {
        let (ell, big_l) = (self.problem.ell(), self.problem.big_l());
        let s: Vec<f64> = self.g_w.iter().map(|g| -g / big_l).collect();
        let df = self.problem.value_difference(&self.w, &s);
        let w_minus_x_sq = self.theta * self.theta * linalg::norm_sq(&self.dx);
        self.sigma_sq = (1.0 - 1.0 / self.sqrt_kappa) * self.sigma_sq
            + 2.0 * df / ell
            + self.grad_norm_w * self.grad_norm_w / (big_l * ell)
            - (self.sqrt_kappa - 1.0 / self.sqrt_kappa) * w_minus_x_sq;
        self.f_x = self.f_w + df;
        // x_{k+1} - x_k = (w_k - x_k) + s
        linalg::axpby(1.0, &s, self.theta, &mut self.dx);
        linalg::axpy(1.0, &s, &mut self.w);
        std::mem::swap(&mut self.x, &mut self.w);
        self.w.copy_from_slice(&self.x);
        linalg::axpy(self.theta, &self.dx, &mut self.w);
        self.f_w = self.problem.value_and_gradient(&self.w, &mut self.g_w);
        self.grad_norm_w = linalg::norm(&self.g_w);
        Ok(StepReport {
            kind: StepKind::Accelerated,
            cost: 1,
        })
    }
}

/// Accelerated gradient from `x0`. The reported point is `w_k`.
pub fn ag_run<P: Objective + ?Sized>(
    problem: &P,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    let mut state = AgState::new(problem, x0)?;
    drive(&mut state, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    #[test]
    fn matches_textbook_recurrence() {
        let q = Quadratic::random_spd(10, 30.0, 5).unwrap();
        let x0 = vec![0.5; 10];
        let mut state = AgState::new(&q, &x0).unwrap();
        let theta = state.theta();
        let (mut x_prev, mut x, mut w) = (x0.clone(), x0.clone(), x0.clone());
        for k in 1..=25 {
            state.step(k).unwrap();
            let g = q.gradient(&w);
            let x_new = linalg::lincomb(1.0, &w, -1.0 / q.big_l(), &g);
            x_prev = std::mem::replace(&mut x, x_new);
            w = x
                .iter()
                .zip(&x_prev)
                .map(|(a, b)| a + theta * (a - b))
                .collect();
            assert!(linalg::dist_sq(state.x(), &x).sqrt() < 1e-12);
            assert!(linalg::dist_sq(state.point(), &w).sqrt() < 1e-12);
        }
        assert!(linalg::dist_sq(&x, &x_prev) > 0.0);
    }

    #[test]
    fn potential_decreases_and_bounds() {
        let q = Quadratic::random_spd(15, 200.0, 9).unwrap();
        let xs = q.solve_direct().unwrap();
        let fs = q.value(&xs);
        let mut state = AgState::new(&q, &[1.0; 15]).unwrap();
        let rate = 1.0 - (q.ell() / q.big_l()).sqrt();
        let s0 = state.sigma_sq().unwrap();
        for k in 1..=200 {
            let before = state.sigma_sq().unwrap();
            state.step(k).unwrap();
            let after = state.sigma_sq().unwrap();
            assert!(after <= rate * before + 1e-10 * s0);
            let psi = linalg::dist_sq(&state.y(), &xs) + 2.0 * (q.value(state.x()) - fs) / q.ell();
            assert!(after >= psi - 1e-8 * s0, "k={k}: {after} < {psi}");
        }
    }

    #[test]
    fn converges() {
        let q = Quadratic::random_spd(20, 100.0, 1).unwrap();
        let r = ag_run(&q, &[0.0; 20], &SolverOptions::with_tol(1e-10)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, r.outer_iterations);
    }
}
