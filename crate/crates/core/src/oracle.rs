//! Ground truth on quadratics, where `x*` is known exactly.
//!
//! The idealized method minimizes `f` over a two-dimensional affine set
//! spanned at `x_k` by `y_k - x_k` and `grad f(x_k)`, and takes `y_{k+1}` as
//! the point of that set nearest `x*`. It needs `x*` and so is only a
//! reference for the implementable methods.

use crate::linalg;
use crate::problems::{Objective, Quadratic};
use thiserror::Error;

/// Relative Gram determinant below which two spanning vectors count as parallel.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("problem does not provide its exact minimizer")]
    NoMinimizer,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// `x*` and `f*` with the strong-convexity constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub ell: f64,
}

impl Reference {
    pub fn new<P: Objective + ?Sized>(problem: &P) -> Result<Self, OracleError> {
        let x_star = problem.exact_minimizer().ok_or(OracleError::NoMinimizer)?;
        Ok(Self {
            f_star: problem.value(&x_star),
            x_star,
            ell: problem.ell(),
        })
    }

    /// `|y - x*|^2 + 2 (f(x) - f*) / ell` given `f(x)`.
    pub fn psi(&self, f_x: f64, y: &[f64]) -> f64 {
        linalg::dist_sq(y, &self.x_star) + 2.0 * (f_x - self.f_star) / self.ell
    }
}

/// `|y - x*|^2 + 2 (f(x) - f*) / ell`.
pub fn exact_psi<P: Objective + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
) -> Result<f64, OracleError> {
    Ok(Reference::new(problem)?.psi(problem.value(x), y))
}

/// `2 (f(x_k) - f*) / |r_{k-1}|^2`: the CG step along `p_k` from `x_k` that
/// lands nearest `x*`.
pub fn tau(f_x: f64, f_star: f64, prev_residual_sq: f64) -> f64 {
    2.0 * (f_x - f_star) / prev_residual_sq
}

/// Drops zero vectors and, of two nearly parallel vectors, the first.
fn independent(basis: &[Vec<f64>]) -> Vec<&[f64]> {
    let nonzero: Vec<&[f64]> = basis
        .iter()
        .map(|b| b.as_slice())
        .filter(|b| linalg::norm_sq(b) > 0.0)
        .collect();
    if let [b1, b2] = nonzero[..] {
        let (g11, g22, g12) = (
            linalg::norm_sq(b1),
            linalg::norm_sq(b2),
            linalg::dot(b1, b2),
        );
        if (g11 * g22 - g12 * g12) / (g11 * g22) < RANK_TOL {
            return vec![b2];
        }
    }
    nonzero
}

/// Solves the at most 2x2 symmetric system `m c = rhs`.
fn solve_small(m: &[[f64; 2]; 2], rhs: &[f64; 2], dim: usize) -> [f64; 2] {
    match dim {
        0 => [0.0, 0.0],
        1 => [rhs[0] / m[0][0], 0.0],
        _ => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            [
                (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
                (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
            ]
        }
    }
}

fn combine(anchor: &[f64], basis: &[&[f64]], c: &[f64; 2]) -> Vec<f64> {
    let mut out = anchor.to_vec();
    for (b, ci) in basis.iter().zip(c) {
        linalg::axpy(*ci, b, &mut out);
    }
    out
}

/// Orthogonal projection of `x_star` onto `anchor + span(basis)`.
pub fn projection_onto_affine(x_star: &[f64], anchor: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let basis = independent(basis);
    let d = linalg::sub(x_star, anchor);
    let mut m = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for (i, bi) in basis.iter().enumerate() {
        rhs[i] = linalg::dot(bi, &d);
        for (j, bj) in basis.iter().enumerate() {
            m[i][j] = linalg::dot(bi, bj);
        }
    }
    combine(anchor, &basis, &solve_small(&m, &rhs, basis.len()))
}

/// Minimizer of the quadratic over `anchor + span(basis)`.
pub fn minimize_on_affine(problem: &Quadratic, anchor: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let basis = independent(basis);
    let g = problem.gradient(anchor);
    let ab: Vec<Vec<f64>> = basis.iter().map(|b| problem.matvec(b)).collect();
    let mut m = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for (i, bi) in basis.iter().enumerate() {
        rhs[i] = -linalg::dot(bi, &g);
        for (j, abj) in ab.iter().enumerate() {
            m[i][j] = linalg::dot(bi, abj);
        }
    }
    combine(anchor, &basis, &solve_small(&m, &rhs, basis.len()))
}

/// One iterate of the idealized method.
#[derive(Debug, Clone, PartialEq)]
pub struct IaIterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
    pub psi: f64,
    /// Spanning vectors of the affine set `x` was chosen from (empty at the start).
    pub basis: Vec<Vec<f64>>,
}

/// Runs the idealized method for `iters` iterations or until the gradient vanishes.
/// Entry 0 is the start, `x_0 = y_0`.
pub fn ia_run(
    problem: &Quadratic,
    x0: &[f64],
    iters: usize,
) -> Result<Vec<IaIterate>, OracleError> {
    if x0.len() != problem.dim() {
        return Err(OracleError::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let reference = Reference::new(problem)?;
    let f0 = problem.value(x0);
    let mut trace = vec![IaIterate {
        x: x0.to_vec(),
        y: x0.to_vec(),
        f: f0,
        psi: reference.psi(f0, x0),
        basis: Vec::new(),
    }];
    for _ in 0..iters {
        let last = trace.last().expect("trace starts non-empty");
        let g = problem.gradient(&last.x);
        if linalg::norm_sq(&g) == 0.0 {
            break;
        }
        let basis = vec![linalg::sub(&last.y, &last.x), g];
        let x = minimize_on_affine(problem, &last.x, &basis);
        let y = projection_onto_affine(&reference.x_star, &last.x, &basis);
        let f = problem.value(&x);
        let psi = reference.psi(f, &y);
        trace.push(IaIterate {
            x,
            y,
            f,
            psi,
            basis,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let q = Quadratic::new(2, vec![1.0, 0.0, 0.0, 1.0], vec![3.0, -1.0]).unwrap();
        let t = ia_run(&q, &[0.0, 0.0], 3).unwrap();
        assert!(linalg::dist_sq(&t[1].x, &[3.0, -1.0]) < 1e-28);
        assert!(t.len() <= 3);
    }

    #[test]
    fn psi_examples() {
        let q = Quadratic::new(1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(exact_psi(&q, &[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(exact_psi(&q, &[1.0], &[1.0]).unwrap(), 2.0);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            projection_onto_affine(&[3.0, 4.0], &[0.0, 0.0], &[vec![1.0, 0.0]]),
            vec![3.0, 0.0]
        );
        let p = projection_onto_affine(&[1.0, 2.0], &[0.0, 2.0], &[vec![2.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(p, vec![1.0, 2.0]);
        // Parallel pair reduces to one direction.
        let p =
            projection_onto_affine(&[3.0, 4.0], &[0.0, 0.0], &[vec![1.0, 0.0], vec![-2.0, 0.0]]);
        assert!(linalg::dist_sq(&p, &[3.0, 0.0]) < 1e-28);
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let x_star = [0.3, -1.2, 2.0, 0.7, -0.4];
        let anchor = [1.0, 0.0, -1.0, 0.5, 2.0];
        let basis = vec![
            vec![1.0, 2.0, 0.0, -1.0, 0.5],
            vec![0.0, 1.0, 1.0, 3.0, -2.0],
        ];
        let p = projection_onto_affine(&x_star, &anchor, &basis);
        let res = linalg::sub(&x_star, &p);
        for b in &basis {
            assert!(linalg::dot(&res, b).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_contracts() {
        let q = Quadratic::random_spd(30, 1e3, 13).unwrap();
        let rate = 1.0 - (q.ell() / q.big_l()).sqrt();
        let t = ia_run(&q, &[1.0; 30], 20).unwrap();
        for w in t.windows(2) {
            assert!(w[1].psi <= (rate + 1e-10) * w[0].psi);
            let g = q.gradient(&w[1].x);
            for b in independent(&w[1].basis) {
                assert!(
                    linalg::dot(&g, b).abs() <= 1e-10 * linalg::norm(&g).max(1.0) * linalg::norm(b)
                );
            }
        }
    }
}
