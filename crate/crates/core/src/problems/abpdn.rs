use super::{LineRestriction, Objective, ProblemError};
use crate::linalg::{self, CompensatedSum};
use rustdct::{DctPlanner, TransformType2And3};
use std::fmt;
use std::sync::Arc;

/// Weight of the smoothed l1 term used by the benchmark problems.
pub const ABPDN_LAMBDA: f64 = 1e-3;

/// The first `count` primes in increasing order.
pub fn first_primes(count: usize) -> Vec<usize> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| candidate % p != 0)
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// A subset of rows of the orthonormal DCT-II matrix
///
/// ```text
/// C[k][j] = s_k cos(pi k (2j + 1) / (2n)),  s_0 = sqrt(1/n),  s_k = sqrt(2/n)
/// ```
///
/// applied through a fast transform of the full vector. Rows are given as
/// 1-based positions, so position 1 is the constant row `k = 0`.
#[derive(Clone)]
pub struct DctRows {
    n: usize,
    rows: Vec<usize>,
    dct: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for DctRows {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DctRows")
            .field("n", &self.n)
            .field("rows", &self.rows)
            .finish()
    }
}

impl DctRows {
    pub fn new(n: usize, positions: &[usize]) -> Result<Self, ProblemError> {
        if let Some(&bad) = positions.iter().find(|&&p| p == 0 || p > n) {
            return Err(ProblemError::InvalidParameter {
                name: "row position",
                value: bad as f64,
            });
        }
        let dct = DctPlanner::new().plan_dct2(n);
        Ok(Self {
            n,
            rows: positions.iter().map(|p| p - 1).collect(),
            dct,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// 0-based DCT row indices.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    fn row_scale(&self, k: usize) -> f64 {
        if k == 0 {
            (1.0 / self.n as f64).sqrt()
        } else {
            (2.0 / self.n as f64).sqrt()
        }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        let mut buf = x.to_vec();
        let mut scratch = vec![0.0; self.dct.get_scratch_len()];
        self.dct.process_dct2_with_scratch(&mut buf, &mut scratch);
        for (o, &k) in out.iter_mut().zip(&self.rows) {
            *o = self.row_scale(k) * buf[k];
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.apply_into(x, &mut out);
        out
    }

    /// Scatter into the selected rows and run the unnormalized DCT-III,
    /// which computes `z_0 / 2 + sum_k z_k cos(pi k (2j + 1) / (2n))`.
    pub fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        out.fill(0.0);
        for (&yk, &k) in y.iter().zip(&self.rows) {
            let s = self.row_scale(k);
            out[k] += if k == 0 { 2.0 * s * yk } else { s * yk };
        }
        let mut scratch = vec![0.0; self.dct.get_scratch_len()];
        self.dct.process_dct3_with_scratch(out, &mut scratch);
    }

    pub fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.adjoint_into(y, &mut out);
        out
    }
}

/// Smoothed basis pursuit denoising
///
/// ```text
/// f(x) = |Ax - b|^2 + lambda * sum_i sqrt(x_i^2 + delta)
/// ```
///
/// with `A` the first `sqrt(n)` prime-indexed rows of the orthonormal DCT and
/// `b_i = sin(i^2)`.
#[derive(Debug, Clone)]
pub struct Abpdn {
    op: DctRows,
    b: Vec<f64>,
    lambda: f64,
    delta: f64,
    ell: f64,
    big_l: f64,
}

impl Abpdn {
    /// The benchmark instance of size `n` (a power of 4) with the default
    /// weight, and `(ell, L)` estimated around the origin.
    pub fn new(n: usize, delta: f64) -> Result<Self, ProblemError> {
        Self::with_lambda(n, delta, ABPDN_LAMBDA)
    }

    pub fn with_lambda(n: usize, delta: f64, lambda: f64) -> Result<Self, ProblemError> {
        let m = (n as f64).sqrt().round() as usize;
        if n == 0 || m * m != n || !m.is_power_of_two() {
            return Err(ProblemError::NotPowerOfFour(n));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ProblemError::InvalidParameter {
                name: "delta",
                value: delta,
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        let primes = first_primes(m);
        if primes[m - 1] > n {
            return Err(ProblemError::InvalidParameter {
                name: "n",
                value: n as f64,
            });
        }
        let op = DctRows::new(n, &primes)?;
        let b = (1..=m).map(|i| ((i * i) as f64).sin()).collect();
        let big_l = 2.0 + lambda / delta.sqrt();
        let mut problem = Self {
            op,
            b,
            lambda,
            delta,
            ell: 0.0,
            big_l,
        };
        problem.ell = problem.estimate_ell(&vec![0.0; n]);
        log::info!(
            "abpdn n={n} delta={delta:e}: ell = {:.6e}, L = {:.6e}",
            problem.ell,
            problem.big_l
        );
        Ok(problem)
    }

    /// `lambda delta / (R^2 + delta)^{3/2}`: the smallest curvature of the
    /// smoothing term over the box `|x|_inf <= R`, where
    /// `R = max(1, 2 |x0 - x_hat|)` and `x_hat` is one gradient step from `x0`.
    pub fn estimate_ell(&self, x0: &[f64]) -> f64 {
        let g = self.gradient(x0);
        let r = (2.0 * linalg::norm(&g) / self.big_l).max(1.0);
        self.lambda * self.delta / (r * r + self.delta).powf(1.5)
    }

    pub fn operator(&self) -> &DctRows {
        &self.op
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Overrides the strong-convexity estimate.
    pub fn set_ell(&mut self, ell: f64) {
        self.ell = ell;
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.op.apply(x);
        linalg::axpy(-1.0, &self.b, &mut r);
        r
    }

    /// `sum_i sqrt((x_i + s_i)^2 + delta) - sqrt(x_i^2 + delta)` in the
    /// cancellation-free form `s_i (2 x_i + s_i) / (sqrt(..) + sqrt(..))`.
    fn smoothing_difference(&self, x: &[f64], s: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&xi, &si) in x.iter().zip(s) {
            let xs = xi + si;
            let denom = (xs * xs + self.delta).sqrt() + (xi * xi + self.delta).sqrt();
            acc.add(si * (2.0 * xi + si) / denom);
        }
        acc.total()
    }
}

impl Objective for Abpdn {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn ell(&self) -> f64 {
        self.ell
    }

    fn big_l(&self) -> f64 {
        self.big_l
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        let smooth: f64 = x.iter().map(|xi| (xi * xi + self.delta).sqrt()).sum();
        linalg::norm_sq(&r) + self.lambda * smooth
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        let r = self.residual(x);
        self.op.adjoint_into(&r, g);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = 2.0 * *gi + self.lambda * xi / (xi * xi + self.delta).sqrt();
        }
    }

    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let r = self.residual(x);
        self.op.adjoint_into(&r, g);
        let mut smooth = 0.0;
        for (gi, xi) in g.iter_mut().zip(x) {
            let root = (xi * xi + self.delta).sqrt();
            smooth += root;
            *gi = 2.0 * *gi + self.lambda * xi / root;
        }
        linalg::norm_sq(&r) + self.lambda * smooth
    }

    fn hessian_vec_into(&self, x: &[f64], d: &[f64], out: &mut [f64]) {
        let ad = self.op.apply(d);
        self.op.adjoint_into(&ad, out);
        for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
            let q = xi * xi + self.delta;
            *o = 2.0 * *o + self.lambda * self.delta / (q * q.sqrt()) * di;
        }
    }

    /// `(As)'(2(Ax - b) + As)` plus the smoothing difference.
    fn value_difference(&self, x: &[f64], s: &[f64]) -> f64 {
        let r = self.residual(x);
        let as_ = self.op.apply(s);
        let mut acc = CompensatedSum::new();
        for (ri, ai) in r.iter().zip(&as_) {
            acc.add(ai * (2.0 * ri + ai));
        }
        acc.add(self.lambda * self.smoothing_difference(x, s));
        acc.total()
    }

    fn line<'a>(&'a self, origin: &'a [f64], dir: &'a [f64]) -> Box<dyn LineRestriction + 'a> {
        let r0 = self.residual(origin);
        let ad = self.op.apply(dir);
        let slope_data = 2.0 * linalg::dot(&ad, &r0);
        let curv_data = 2.0 * linalg::norm_sq(&ad);
        Box::new(AbpdnLine {
            problem: self,
            origin,
            dir,
            r0,
            ad,
            slope_data,
            curv_data,
        })
    }
}

struct AbpdnLine<'a> {
    problem: &'a Abpdn,
    origin: &'a [f64],
    dir: &'a [f64],
    r0: Vec<f64>,
    ad: Vec<f64>,
    slope_data: f64,
    curv_data: f64,
}

impl LineRestriction for AbpdnLine<'_> {
    fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
        let delta = self.problem.delta;
        let mut slope = 0.0;
        let mut curv = 0.0;
        for (&o, &d) in self.origin.iter().zip(self.dir) {
            let x = o + alpha * d;
            let q = x * x + delta;
            let root = q.sqrt();
            slope += d * x / root;
            curv += d * d * delta / (q * root);
        }
        let lambda = self.problem.lambda;
        (
            self.slope_data + alpha * self.curv_data + lambda * slope,
            self.curv_data + lambda * curv,
        )
    }

    fn value_change(&mut self, alpha: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (ri, ai) in self.r0.iter().zip(&self.ad) {
            let step = alpha * ai;
            acc.add(step * (2.0 * ri + step));
        }
        let s: Vec<f64> = self.dir.iter().map(|d| alpha * d).collect();
        acc.add(self.problem.lambda * self.problem.smoothing_difference(self.origin, &s));
        acc.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::rng::Gaussian;
    use std::f64::consts::PI;

    fn dense_dct(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| {
                let s = if k == 0 {
                    (1.0 / n as f64).sqrt()
                } else {
                    (2.0 / n as f64).sqrt()
                };
                (0..n)
                    .map(|j| s * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos())
                    .collect()
            })
            .collect()
    }

    fn sieve(limit: usize) -> Vec<usize> {
        let mut is = vec![true; limit + 1];
        is[0] = false;
        is[1] = false;
        let mut i = 2;
        while i * i <= limit {
            if is[i] {
                let mut j = i * i;
                while j <= limit {
                    is[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        (0..=limit).filter(|&i| is[i]).collect()
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(4), vec![2, 3, 5, 7]);
        assert_eq!(first_primes(1), vec![2]);
        let p = first_primes(256);
        assert_eq!(p, sieve(2000)[..256].to_vec());
        assert_eq!(p[255], 1619);
    }

    #[test]
    fn matches_dense_dct_at_n16() {
        let op = DctRows::new(16, &[2, 3, 5, 7]).unwrap();
        let c = dense_dct(16);
        let mut g = Gaussian::seed_from_u64(4);
        let x: Vec<f64> = (0..16).map(|_| g.sample()).collect();
        let y: Vec<f64> = (0..4).map(|_| g.sample()).collect();
        let ax = op.apply(&x);
        let aty = op.adjoint(&y);
        for (i, &pos) in [2usize, 3, 5, 7].iter().enumerate() {
            let expect = linalg::dot(&c[pos - 1], &x);
            assert!((ax[i] - expect).abs() < 1e-12, "row {pos}");
        }
        for j in 0..16 {
            let expect: f64 = [2usize, 3, 5, 7]
                .iter()
                .zip(&y)
                .map(|(&p, yi)| c[p - 1][j] * yi)
                .sum();
            assert!((aty[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_row_uses_its_own_scale() {
        let op = DctRows::new(16, &[1, 2]).unwrap();
        let c = dense_dct(16);
        let y = [0.7, -0.2];
        let aty = op.adjoint(&y);
        for j in 0..16 {
            assert!((aty[j] - (c[0][j] * 0.7 - c[1][j] * 0.2)).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_vector_picks_identity_pattern() {
        let n = 64;
        let op = DctRows::new(n, &first_primes(8)).unwrap();
        let c = dense_dct(n);
        // The k-th DCT basis vector (a row of C) maps to e_i when k is the i-th selected row.
        let k = op.rows()[3];
        let y = op.apply(&c[k]);
        for (i, yi) in y.iter().enumerate() {
            let expect = if i == 3 { 1.0 } else { 0.0 };
            assert!((yi - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_large() {
        let n = 4096;
        let op = DctRows::new(n, &first_primes(64)).unwrap();
        let mut g = Gaussian::seed_from_u64(9);
        let x: Vec<f64> = (0..n).map(|_| g.sample()).collect();
        let y: Vec<f64> = (0..64).map(|_| g.sample()).collect();
        let lhs = linalg::dot(&op.apply(&x), &y);
        let rhs = linalg::dot(&x, &op.adjoint(&y));
        assert!((lhs - rhs).abs() <= 1e-12 * linalg::norm(&x) * linalg::norm(&y));
    }

    #[test]
    fn benchmark_instance() {
        let p = Abpdn::new(65536, 1e-2).unwrap();
        assert_eq!(p.operator().m(), 256);
        assert!((p.b()[0] - 0.841471).abs() < 1e-6);
        assert!((p.b()[1] + 0.756802).abs() < 1e-6);
        assert!((p.big_l() - (2.0 + 1e-3 / 0.1)).abs() < 1e-15);
        assert!(p.ell() > 0.0 && p.ell() < p.big_l());
        assert_eq!(
            Abpdn::new(32, 1e-2).unwrap_err(),
            ProblemError::NotPowerOfFour(32)
        );
    }

    #[test]
    fn line_matches_generic() {
        let p = Abpdn::new(256, 1e-3).unwrap();
        let mut g = Gaussian::seed_from_u64(2);
        let o: Vec<f64> = (0..256).map(|_| 0.1 * g.sample()).collect();
        let d: Vec<f64> = (0..256).map(|_| g.sample()).collect();
        let mut fast = p.line(&o, &d);
        let mut slow = crate::problems::GenericLine::new(&p, &o, &d);
        for alpha in [0.0, 0.01, 0.2] {
            let (a1, b1) = fast.derivatives(alpha);
            let (a2, b2) = slow.derivatives(alpha);
            assert!((a1 - a2).abs() < 1e-10 * (1.0 + a2.abs()));
            assert!((b1 - b2).abs() < 1e-10 * b2.abs());
            let (v1, v2) = (fast.value_change(alpha), slow.value_change(alpha));
            assert!((v1 - v2).abs() < 1e-12 * (1.0 + v2.abs()));
        }
    }
}
