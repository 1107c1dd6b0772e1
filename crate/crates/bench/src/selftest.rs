//! Invariant checks on random quadratics, where `x*` is known exactly.
//!
//! Each check returns the worst deviation it saw so callers can both gate on
//! it and print it.

use crate::reference::Report;
use hyncg::oracle::{self, OracleError, Reference};
use hyncg::potential::Branch;
use hyncg::problems::{Objective, ProblemError, Quadratic};
use hyncg::solvers::{AgState, CgState, GdState, HyncgState, Method};
use hyncg::{linalg, SolverError, SolverOptions, StepKind};
use thiserror::Error;

/// Allowed violation of the upper bound and of `sigma^2 >= Psi`, relative to `sigma_0^2`.
pub const BOUND_SLACK: f64 = 1e-8;
/// Allowed excess over the guaranteed contraction, relative to `sigma_0^2`.
pub const DECREASE_SLACK: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SelftestError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// `count` quadratics of size `n` with condition numbers spread
/// logarithmically over `[10, 10^4]`.
pub fn instances(count: usize, n: usize) -> Result<Vec<Quadratic>, ProblemError> {
    (0..count)
        .map(|i| {
            let t = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.0
            };
            Quadratic::random_spd(n, 10f64.powf(1.0 + 3.0 * t), 1000 + i as u64)
        })
        .collect()
}

/// Start point shared by every check: all ones.
pub fn start(q: &Quadratic) -> Vec<f64> {
    vec![1.0; q.dim()]
}

fn rel_dist(a: &[f64], b: &[f64]) -> f64 {
    linalg::dist_sq(a, b).sqrt() / linalg::norm(b).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CgIaAgreement {
    /// Largest `|x_cg - x_ia| / |x_ia|`.
    pub x: f64,
    /// Largest `|(x_cg + tau p_cg) - y_ia| / |y_ia|`.
    pub y: f64,
    pub iterations: usize,
}

/// Runs linear CG and the idealized method side by side, stopping early once
/// the residual has dropped by `1e-10` (past that point `tau` is a ratio of
/// rounding errors).
pub fn cg_vs_ia(q: &Quadratic, iters: usize) -> Result<CgIaAgreement, SelftestError> {
    let x0 = start(q);
    let ia = oracle::ia_run(q, &x0, iters)?;
    let reference = Reference::new(q)?;
    let mut cg = CgState::new(q, &x0)?;
    let r0 = cg.grad_norm();
    let mut out = CgIaAgreement::default();
    for (k, ia_k) in ia.iter().enumerate().skip(1) {
        if cg.grad_norm() <= 1e-10 * r0 {
            break;
        }
        let prev_r_sq = linalg::norm_sq(cg.residual());
        cg.step(k)?;
        let tau = oracle::tau(cg.value(), reference.f_star, prev_r_sq);
        let y = linalg::lincomb(1.0, cg.point(), tau, cg.direction());
        out.x = out.x.max(rel_dist(cg.point(), &ia_k.x));
        out.y = out.y.max(rel_dist(&y, &ia_k.y));
        out.iterations = k;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HyncgCgAgreement {
    /// Largest `|x_hyncg - x_cg| / max(|x_cg|, 1)`.
    pub x: f64,
    pub accepted: usize,
    pub iterations: usize,
}

/// Runs the hybrid and linear CG side by side until the residual vanishes
/// or `iters` iterations.
pub fn hyncg_vs_cg(q: &Quadratic, iters: usize) -> Result<HyncgCgAgreement, SelftestError> {
    let x0 = start(q);
    let mut hy = HyncgState::new(q, &x0, &SolverOptions::default())?;
    let mut cg = CgState::new(q, &x0)?;
    let r0 = cg.grad_norm();
    let mut out = HyncgCgAgreement::default();
    for k in 1..=iters {
        if cg.grad_norm() <= 1e-13 * r0 {
            break;
        }
        if hy.step(k)?.kind == StepKind::CgAccepted {
            out.accepted += 1;
        }
        cg.step(k)?;
        let scale = linalg::norm(cg.point()).max(1.0);
        out.x = out
            .x
            .max(linalg::dist_sq(hy.point(), cg.point()).sqrt() / scale);
        out.iterations = k;
    }
    Ok(out)
}

/// Methods whose potential trace can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traced {
    Gd,
    Ag,
    Cg,
    Hyncg,
}

impl Traced {
    pub const ALL: [Traced; 4] = [Traced::Gd, Traced::Ag, Traced::Cg, Traced::Hyncg];

    pub fn name(&self) -> &'static str {
        match self {
            Traced::Gd => "GD",
            Traced::Ag => "AG",
            Traced::Cg => "CG",
            Traced::Hyncg => "HyNCG",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PotentialStats {
    /// Largest `(Psi_k - sigma_k^2) / sigma_0^2`, where
    /// `Psi_k = |y_k - x*|^2 + 2 (f(x_k) - f*) / ell`.
    pub bound_violation: f64,
    /// Largest `(sigma_k^2 - rate sigma_{k-1}^2) / sigma_0^2` over the steps
    /// that guarantee a decrease (not measured for AG).
    pub decrease_violation: f64,
    pub iterations: usize,
    /// Steps excluded from the decrease check (keep-previous branch).
    pub skipped: usize,
}

/// Whether an iteration is covered by the contraction guarantee.
fn guaranteed(branch: Option<Branch>, kind: StepKind) -> bool {
    kind == StepKind::CgAccepted || branch.is_some_and(|b| b != Branch::KeepPrevious)
}

struct Observation {
    x: Vec<f64>,
    y: Vec<f64>,
    sigma_sq: f64,
    decrease: bool,
}

/// Steps `method` up to `iters` times (stopping early once `|grad f|`
/// reaches roundoff level), checking the potential after every step.
pub fn potential_trace(
    q: &Quadratic,
    method: Traced,
    iters: usize,
) -> Result<PotentialStats, SelftestError> {
    let x0 = start(q);
    let reference = Reference::new(q)?;
    let rate = 1.0 - (q.ell() / q.big_l()).sqrt();
    let options = SolverOptions {
        ls_tol: 1e-12,
        ..SolverOptions::default()
    };
    let mut gd = GdState::new(q, &x0, &options)?;
    let mut ag = AgState::new(q, &x0)?;
    let mut cg = CgState::new(q, &x0)?;
    let mut hy = HyncgState::new(q, &x0, &options)?;
    let g0 = linalg::norm(&q.gradient(&x0));
    let mut observe = |k: usize| -> Result<Option<Observation>, SolverError> {
        fn snap<M: Method>(m: &M) -> (Vec<f64>, Vec<f64>, f64, f64) {
            let s = m.snapshot();
            (
                s.x,
                s.y.expect("traced methods carry y"),
                m.sigma_sq().expect("traced methods carry sigma"),
                m.grad_norm(),
            )
        }
        let (state, decrease) = match method {
            Traced::Gd => {
                if k > 0 {
                    gd.step(k)?;
                }
                (snap(&gd), guaranteed(gd.last_branch(), StepKind::Geometric))
            }
            Traced::Ag => {
                if k > 0 {
                    ag.step(k)?;
                }
                (snap(&ag), false)
            }
            Traced::Cg => {
                if k > 0 {
                    cg.step(k)?;
                }
                (snap(&cg), guaranteed(cg.last_branch(), StepKind::LinearCg))
            }
            Traced::Hyncg => {
                let kind = if k > 0 {
                    hy.step(k)?.kind
                } else {
                    StepKind::Start
                };
                (snap(&hy), guaranteed(hy.last_branch(), kind))
            }
        };
        let (x, y, sigma_sq, grad_norm) = state;
        if k > 0 && grad_norm <= 1e-12 * g0 {
            return Ok(None);
        }
        Ok(Some(Observation {
            x,
            y,
            sigma_sq,
            decrease,
        }))
    };
    let first = observe(0)?.expect("start is observed");
    let sigma0 = first.sigma_sq;
    let mut stats = PotentialStats::default();
    let mut prev = first.sigma_sq;
    let mut obs = Some(first);
    let mut k = 0;
    while let Some(o) = obs {
        let psi = reference.psi(q.value(&o.x), &o.y);
        stats.bound_violation = stats.bound_violation.max((psi - o.sigma_sq) / sigma0);
        if k > 0 {
            if o.decrease {
                stats.decrease_violation = stats
                    .decrease_violation
                    .max((o.sigma_sq - rate * prev) / sigma0);
            } else if method != Traced::Ag {
                stats.skipped += 1;
            }
            stats.iterations = k;
        }
        prev = o.sigma_sq;
        k += 1;
        obs = if k <= iters { observe(k)? } else { None };
    }
    Ok(stats)
}

/// Largest `(Psi_k - rate Psi_{k-1}) / Psi_0` along the idealized method.
pub fn ia_decrease(q: &Quadratic, iters: usize) -> Result<f64, SelftestError> {
    let trace = oracle::ia_run(q, &start(q), iters)?;
    let rate = 1.0 - (q.ell() / q.big_l()).sqrt();
    let psi0 = trace[0].psi;
    Ok(trace
        .windows(2)
        .map(|w| (w[1].psi - rate * w[0].psi) / psi0)
        .fold(0.0, f64::max))
}

/// All checks on `count` random quadratics of size `n`, 20 iterations each
/// (potential traces run 200).
pub fn run(count: usize, n: usize) -> Result<Report, SelftestError> {
    let mut report = Report::default();
    let push = |report: &mut Report, name: String, passed: bool, detail: String| {
        report.checks.push(crate::reference::Check {
            name,
            passed,
            detail,
        });
    };
    for (i, q) in instances(count, n)?.iter().enumerate() {
        let kappa = q.big_l() / q.ell();
        let tag = format!("quadratic {i} (kappa {kappa:.0})");
        let a = cg_vs_ia(q, 20)?;
        push(
            &mut report,
            format!("{tag} CG = IA"),
            a.x <= 1e-8 && a.y <= 1e-8,
            format!("x {:.1e}, y {:.1e}", a.x, a.y),
        );
        let h = hyncg_vs_cg(q, 20)?;
        push(
            &mut report,
            format!("{tag} HyNCG = CG"),
            h.x <= 1e-6 && h.accepted == h.iterations,
            format!("x {:.1e}, accepted {}/{}", h.x, h.accepted, h.iterations),
        );
        for m in Traced::ALL {
            let s = potential_trace(q, m, 200)?;
            let ok = s.bound_violation <= BOUND_SLACK && s.decrease_violation <= DECREASE_SLACK;
            push(
                &mut report,
                format!("{tag} {} potential", m.name()),
                ok,
                format!(
                    "bound {:.1e}, decrease {:.1e}, {} steps",
                    s.bound_violation, s.decrease_violation, s.iterations
                ),
            );
        }
        let d = ia_decrease(q, 20)?;
        push(
            &mut report,
            format!("{tag} IA Psi decrease"),
            d <= DECREASE_SLACK,
            format!("{d:.1e}"),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_spread() {
        let qs = instances(3, 10).unwrap();
        let kappas: Vec<f64> = qs.iter().map(|q| q.big_l() / q.ell()).collect();
        for (k, want) in kappas.iter().zip([10.0, 316.227_766, 1e4]) {
            assert!((k / want - 1.0).abs() < 1e-6, "{k} vs {want}");
        }
    }

    #[test]
    fn small_suite_passes() {
        let report = run(2, 12).unwrap();
        assert!(report.passed(), "{}", report.render());
    }
}
