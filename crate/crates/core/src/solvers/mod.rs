//! The optimization methods and their shared driver.
//!
//! Each method is a state machine with a `step` that advances one outer
//! iteration. [`drive`] runs any of them to a gradient-norm tolerance, an
//! outer-iteration cap, or an error, and records one [`IterationRecord`] per
//! iteration.
//!
//! Cost accounting follows the usual conventions for these methods: line
//! search methods are charged one unit per derivative evaluation of the line
//! function, CG and accelerated gradient one unit per outer iteration, and the
//! hybrid one unit per accepted CG step plus its line-search evaluations.
//! The two always-compare variants are charged one unit per candidate step
//! they evaluate (two per iteration when a CG step exists).

mod ag;
mod cg;
mod gd;
mod hyncg;
pub mod linesearch;
mod ncg;

pub use ag::{ag_run, AgState};
pub use cg::{cg_run, CgState};
pub use gd::{gd_run, GdState};
pub use hyncg::{
    cgstep, hyncg_run, hyncg_variant_run, hz_beta, CgCandidate, Criterion, HyncgState,
};
pub use linesearch::{line_search, LineSearchError, LineSearchResult};
pub use ncg::{ncg_run, NcgState};

use crate::linalg;
use crate::potential::PotentialError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once `|grad f| <= tol`.
    pub tol: f64,
    /// Outer iterations before giving up.
    pub max_outer: usize,
    /// Relative tolerance on the line-search derivative.
    pub ls_tol: f64,
    /// Derivative evaluations allowed per line search.
    pub max_inner: usize,
    /// Store every iterate (and auxiliary `y`) in the result.
    pub keep_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_outer: 100_000,
            ls_tol: 1e-8,
            max_inner: 100,
            keep_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) || self.max_outer == 0 || !(self.ls_tol > 0.0) || self.max_inner < 2 {
            return Err(SolverError::InvalidOptions(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// The starting point.
    Start,
    /// Geometric-descent step: gradient step followed by a line search toward `y`.
    Geometric,
    Accelerated,
    LinearCg,
    /// Nonlinear CG with a line search.
    Nonlinear,
    /// Nonlinear CG after resetting to steepest descent.
    Restart,
    /// Hybrid: the CG candidate was kept.
    CgAccepted,
    /// Hybrid: fell back to a geometric-descent step.
    GdFallback,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Start => "start",
            StepKind::Geometric => "gd",
            StepKind::Accelerated => "ag",
            StepKind::LinearCg => "cg",
            StepKind::Nonlinear => "ncg",
            StepKind::Restart => "restart",
            StepKind::CgAccepted => "cg_accepted",
            StepKind::GdFallback => "gd_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub kind: StepKind,
    pub f: f64,
    pub grad_norm: f64,
    /// Squared potential, for the methods that maintain one.
    pub sigma_sq: Option<f64>,
    /// Cost charged to this iteration.
    pub inner: usize,
    pub cumulative: usize,
}

/// An iterate and, when the method has one, its auxiliary point `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// The point whose gradient norm is reported.
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    /// Total cost under the accounting described in the module docs.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    /// Filled when [`SolverOptions::keep_iterates`] is set; entry `k` is iterate `k`.
    pub iterates: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("non-finite value or gradient at iteration {0}")]
    NonFinite(usize),
    #[error("operator is not positive definite (p'Ap = {0})")]
    NotPositiveDefinite(f64),
    #[error("dimension mismatch: problem has {expected} unknowns, start point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("line search failed at iteration {iteration}: {source}")]
    LineSearch {
        iteration: usize,
        source: LineSearchError,
    },
    #[error("potential update failed at iteration {iteration}: {source}")]
    Potential {
        iteration: usize,
        source: PotentialError,
    },
}

/// What a method reports after each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub kind: StepKind,
    pub cost: usize,
}

/// A method advanced one outer iteration at a time by [`drive`].
pub trait Method {
    /// The point whose gradient norm decides termination.
    fn point(&self) -> &[f64];
    fn value(&self) -> f64;
    fn grad_norm(&self) -> f64;
    fn sigma_sq(&self) -> Option<f64>;
    /// Current iterate and auxiliary point, for traces.
    fn snapshot(&self) -> Snapshot;
    fn step(&mut self, iteration: usize) -> Result<StepReport, SolverError>;
}

/// Runs `method` until its gradient norm reaches `options.tol` or
/// `options.max_outer` iterations have been taken.
pub fn drive<M: Method>(
    method: &mut M,
    options: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    options.validate()?;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let record = |m: &M, index, kind, inner, cumulative| IterationRecord {
        index,
        kind,
        f: m.value(),
        grad_norm: m.grad_norm(),
        sigma_sq: m.sigma_sq(),
        inner,
        cumulative,
    };
    if !(method.value().is_finite() && method.grad_norm().is_finite()) {
        return Err(SolverError::NonFinite(0));
    }
    trace.push(record(method, 0, StepKind::Start, 0, 0));
    if options.keep_iterates {
        iterates.push(method.snapshot());
    }
    let mut cumulative = 0;
    let mut outer = 0;
    let converged = loop {
        if method.grad_norm() <= options.tol {
            break true;
        }
        if outer >= options.max_outer {
            break false;
        }
        outer += 1;
        let report = method.step(outer)?;
        if !(method.value().is_finite()
            && method.grad_norm().is_finite()
            && linalg::all_finite(method.point()))
        {
            return Err(SolverError::NonFinite(outer));
        }
        cumulative += report.cost;
        trace.push(record(method, outer, report.kind, report.cost, cumulative));
        if options.keep_iterates {
            iterates.push(method.snapshot());
        }
    };
    if !converged {
        log::warn!(
            "stopped after {outer} outer iterations with |grad f| = {:.3e}",
            method.grad_norm()
        );
    }
    Ok(SolveResult {
        x: method.point().to_vec(),
        f: method.value(),
        grad_norm: method.grad_norm(),
        iterations: cumulative,
        outer_iterations: outer,
        converged,
        trace,
        iterates,
    })
}

pub(crate) fn check_start(dim: usize, x0: &[f64]) -> Result<(), SolverError> {
    if dim != x0.len() {
        return Err(SolverError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    Ok(())
}
