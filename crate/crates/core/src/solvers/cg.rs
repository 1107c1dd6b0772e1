//! Linear conjugate gradient on a quadratic, with the geometric-descent
//! potential carried along.
//!
//! The ball update is exactly the one geometric descent uses; only the
//! iterate itself comes from the CG recurrence.

use super::{
    check_start, drive, Method, Snapshot, SolveResult, SolverError, SolverOptions, StepKind,
    StepReport,
};
use crate::linalg;
use crate::potential::{
    init_potential, stable_gamma_diff, update_sigma, ycompute, Branch, PotentialState,
};
use crate::problems::{Objective, Quadratic};

pub struct CgState<'a> {
    problem: &'a Quadratic,
    x: Vec<f64>,
    /// `b - A x`, updated by recurrence.
    r: Vec<f64>,
    /// Direction that produced the current iterate (zero at the start).
    p: Vec<f64>,
    r_dot: f64,
    prev_r_dot: f64,
    f: f64,
    potential: PotentialState,
    last_alpha: f64,
    last_branch: Option<Branch>,
}

impl<'a> CgState<'a> {
    pub fn new(problem: &'a Quadratic, x0: &[f64]) -> Result<Self, SolverError> {
        check_start(problem.dim(), x0)?;
        let x = x0.to_vec();
        let r = problem.residual(&x);
        let r_dot = linalg::norm_sq(&r);
        let potential = init_potential(r_dot.sqrt(), problem.ell(), x.len()).map_err(|source| {
            SolverError::Potential {
                iteration: 0,
                source,
            }
        })?;
        Ok(Self {
            problem,
            f: problem.value(&x),
            p: vec![0.0; x.len()],
            x,
            r,
            r_dot,
            prev_r_dot: r_dot,
            potential,
            last_alpha: 0.0,
            last_branch: None,
        })
    }

    /// `b - A x_k` as maintained by the recurrence.
    pub fn residual(&self) -> &[f64] {
        &self.r
    }

    /// `p_k`, the direction of the step that produced `x_k`.
    pub fn direction(&self) -> &[f64] {
        &self.p
    }

    pub fn last_alpha(&self) -> f64 {
        self.last_alpha
    }

    pub fn last_branch(&self) -> Option<Branch> {
        self.last_branch
    }

    /// `y_k - x_k` of the potential.
    pub fn y_offset(&self) -> &[f64] {
        &self.potential.y_offset
    }
}

impl Method for CgState<'_> {
    fn point(&self) -> &[f64] {
        &self.x
    }

    fn value(&self) -> f64 {
        self.f
    }

    fn grad_norm(&self) -> f64 {
        self.r_dot.sqrt()
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
        let g: Vec<f64> = self.r.iter().map(|v| -v).collect();
        let yc = ycompute(
            &g,
            &self.potential.y_offset,
            self.potential.sigma_sq,
            self.problem.ell(),
        )
        .map_err(|source| SolverError::Potential { iteration, source })?;
        if iteration == 1 {
            self.p.copy_from_slice(&self.r);
        } else {
            let beta = self.r_dot / self.prev_r_dot;
            linalg::axpby(1.0, &self.r, beta, &mut self.p);
        }
        let ap = self.problem.matvec(&self.p);
        let pap = linalg::dot(&self.p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::NotPositiveDefinite(pap));
        }
        let alpha = self.r_dot / pap;
        let step: Vec<f64> = self.p.iter().map(|v| alpha * v).collect();
        let gamma_hat = stable_gamma_diff(self.problem, &self.x, &step);
        let sigma_sq = update_sigma(yc.xi_sq, gamma_hat)
            .map_err(|source| SolverError::Potential { iteration, source })?;
        linalg::axpy(1.0, &step, &mut self.x);
        linalg::axpy(-alpha, &ap, &mut self.r);
        self.prev_r_dot = self.r_dot;
        self.r_dot = linalg::norm_sq(&self.r);
        self.f = self.problem.value(&self.x);
        self.potential = PotentialState {
            sigma_sq,
            y_offset: linalg::sub(&yc.y_offset, &step),
        };
        self.last_alpha = alpha;
        self.last_branch = Some(yc.branch);
        Ok(StepReport {
            kind: StepKind::LinearCg,
            cost: 1,
        })
    }
}

/// Linear CG from `x0`.
pub fn cg_run(
    problem: &Quadratic,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    let mut state = CgState::new(problem, x0)?;
    drive(&mut state, options)
}
