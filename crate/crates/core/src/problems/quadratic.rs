use super::rng::Gaussian;
use super::{check_dim, LineRestriction, Objective, ProblemError};
use crate::linalg::{self, CompensatedSum};
use nalgebra::{DMatrix, DVector};

/// `f(x) = x'Ax/2 - b'x` with `A` symmetric positive definite, stored dense.
#[derive(Debug, Clone)]
pub struct Quadratic {
    n: usize,
    /// Row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    ell: f64,
    big_l: f64,
}

impl Quadratic {
    /// Takes a row-major `n x n` matrix. `(ell, L)` are the extreme
    /// eigenvalues, computed here.
    pub fn new(n: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self, ProblemError> {
        check_dim(n * n, a.len())?;
        check_dim(n, b.len())?;
        let m = DMatrix::from_row_slice(n, n, &a);
        let eig = m.clone().symmetric_eigen();
        let ell = eig.eigenvalues.min();
        let big_l = eig.eigenvalues.max();
        if ell <= 0.0 {
            return Err(ProblemError::NotPositiveDefinite);
        }
        // Symmetrize so that roundoff in the caller's matrix cannot break A = A'.
        let sym = (&m + m.transpose()) * 0.5;
        let a = sym.transpose().as_slice().to_vec();
        Ok(Self {
            n,
            a,
            b,
            ell,
            big_l,
        })
    }

    /// `A = Q diag(eigenvalues) Q'` with `Q` Haar-distributed orthogonal.
    pub fn with_eigenvalues(
        eigenvalues: &[f64],
        b: Vec<f64>,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        let n = eigenvalues.len();
        check_dim(n, b.len())?;
        if let Some(&bad) = eigenvalues.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(ProblemError::InvalidParameter {
                name: "eigenvalue",
                value: bad,
            });
        }
        let mut g = Gaussian::seed_from_u64(seed);
        let z = DMatrix::from_fn(n, n, |_, _| g.sample());
        let q = z.qr().q();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        let m = &q * d * q.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let ell = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let big_l = eigenvalues.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            n,
            a: m.transpose().as_slice().to_vec(),
            b,
            ell,
            big_l,
        })
    }

    /// Random SPD quadratic with extreme eigenvalues 1 and `kappa`, the rest
    /// uniform on `[1, kappa]`, and a standard normal right-hand side.
    pub fn random_spd(n: usize, kappa: f64, seed: u64) -> Result<Self, ProblemError> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(ProblemError::InvalidParameter {
                name: "kappa",
                value: kappa,
            });
        }
        let mut g = Gaussian::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let eigs: Vec<f64> = (0..n)
            .map(|i| match i {
                0 => 1.0,
                _ if i + 1 == n => kappa,
                _ => 1.0 + (kappa - 1.0) * g.uniform(),
            })
            .collect();
        let b = (0..n).map(|_| g.sample()).collect();
        Self::with_eigenvalues(&eigs, b, seed)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = linalg::dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out);
        out
    }

    /// `b - Ax`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.matvec(x);
        linalg::sub(&self.b, &ax)
    }

    /// Dense Cholesky solve of `Ax = b`.
    pub fn solve_direct(&self) -> Result<Vec<f64>, ProblemError> {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.a);
        let chol = m.cholesky().ok_or(ProblemError::NotPositiveDefinite)?;
        Ok(chol
            .solve(&DVector::from_column_slice(&self.b))
            .as_slice()
            .to_vec())
    }

    /// Plain CG on `Ax = b` to `|r| <= rel_tol |b|`.
    pub fn solve_cg(&self, rel_tol: f64, max_iter: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        let mut r = self.b.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; self.n];
        let mut rr = linalg::norm_sq(&r);
        let target = (rel_tol * linalg::norm(&self.b)).powi(2);
        for _ in 0..max_iter {
            if rr <= target {
                break;
            }
            self.matvec_into(&p, &mut ap);
            let alpha = rr / linalg::dot(&p, &ap);
            linalg::axpy(alpha, &p, &mut x);
            linalg::axpy(-alpha, &ap, &mut r);
            let rr_new = linalg::norm_sq(&r);
            linalg::axpby(1.0, &r, rr_new / rr, &mut p);
            rr = rr_new;
        }
        x
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.n
    }

    fn ell(&self) -> f64 {
        self.ell
    }

    fn big_l(&self) -> f64 {
        self.big_l
    }

    fn value(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        0.5 * linalg::dot(x, &ax) - linalg::dot(&self.b, x)
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.matvec_into(x, g);
        linalg::axpy(-1.0, &self.b, g);
    }

    fn hessian_vec_into(&self, _x: &[f64], d: &[f64], out: &mut [f64]) {
        self.matvec_into(d, out);
    }

    /// `s'(Ax - b + As/2)`, never forming `x + s`.
    fn value_difference(&self, x: &[f64], s: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let as_ = self.matvec(s);
        let mut acc = CompensatedSum::new();
        for i in 0..self.n {
            acc.add(s[i] * (ax[i] - self.b[i]));
            acc.add(0.5 * s[i] * as_[i]);
        }
        acc.total()
    }

    fn line<'a>(&'a self, origin: &'a [f64], dir: &'a [f64]) -> Box<dyn LineRestriction + 'a> {
        let mut g0 = vec![0.0; self.n];
        self.gradient_into(origin, &mut g0);
        let ad = self.matvec(dir);
        Box::new(QuadraticLine {
            slope: linalg::dot(&g0, dir),
            curvature: linalg::dot(&ad, dir),
        })
    }

    fn exact_minimizer(&self) -> Option<Vec<f64>> {
        if self.n <= 200 {
            self.solve_direct().ok()
        } else {
            Some(self.solve_cg(1e-14, 10 * self.n))
        }
    }
}

struct QuadraticLine {
    slope: f64,
    curvature: f64,
}

impl LineRestriction for QuadraticLine {
    fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
        (self.slope + alpha * self.curvature, self.curvature)
    }

    fn value_change(&mut self, alpha: f64) -> f64 {
        alpha * (self.slope + 0.5 * alpha * self.curvature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_spd_has_requested_spectrum() {
        let q = Quadratic::random_spd(20, 100.0, 3).unwrap();
        assert!((q.ell() - 1.0).abs() < 1e-12);
        assert!((q.big_l() - 100.0).abs() < 1e-12);
        let eig = DMatrix::from_row_slice(20, 20, q.a())
            .symmetric_eigen()
            .eigenvalues;
        assert!((eig.min() - 1.0).abs() < 1e-10);
        assert!((eig.max() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn exact_minimizer_solves_system() {
        let q = Quadratic::random_spd(30, 1e4, 8).unwrap();
        let x = q.exact_minimizer().unwrap();
        let r = q.residual(&x);
        assert!(linalg::norm(&r) <= 1e-10 * linalg::norm(q.b()));
        let y = q.solve_cg(1e-14, 1000);
        assert!(linalg::dist_sq(&x, &y).sqrt() <= 1e-8 * linalg::norm(&x));
    }

    #[test]
    fn one_dimensional_difference() {
        let q = Quadratic::new(1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(q.value_difference(&[1.0], &[-1.0]), -0.5);
        assert_eq!(q.value_difference(&[1.0], &[0.0]), 0.0);
    }

    #[test]
    fn rejects_indefinite() {
        assert_eq!(
            Quadratic::new(2, vec![1.0, 0.0, 0.0, -1.0], vec![0.0, 0.0]).unwrap_err(),
            ProblemError::NotPositiveDefinite
        );
    }

    #[test]
    fn line_matches_generic() {
        let q = Quadratic::random_spd(10, 50.0, 1).unwrap();
        let o: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let d: Vec<f64> = (0..10).map(|i| 1.0 - i as f64 * 0.05).collect();
        let mut fast = q.line(&o, &d);
        let mut slow = super::super::GenericLine::new(&q, &o, &d);
        for alpha in [0.0, 0.3, -1.2] {
            let (a1, b1) = fast.derivatives(alpha);
            let (a2, b2) = slow.derivatives(alpha);
            assert!((a1 - a2).abs() < 1e-10 * (1.0 + a2.abs()));
            assert!((b1 - b2).abs() < 1e-10 * b2.abs());
            assert!((fast.value_change(alpha) - slow.value_change(alpha)).abs() < 1e-10);
        }
    }
}
