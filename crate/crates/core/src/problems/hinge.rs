use super::rng::Gaussian;
use super::{check_dim, power_iteration, LineRestriction, Objective, ProblemError};
use crate::linalg::{self, CompensatedSum};
use nalgebra::{DMatrix, DMatrixView, Dyn};
use std::sync::{Arc, OnceLock};

pub const DEFAULT_NOISE_SIGMA: f64 = 0.4;

/// Smoothed hinge `h(v)` with its first and second derivatives:
///
/// ```text
/// h(v) = 1/2 - v        v <= 0
///        (1 - v)^2 / 2  0 <= v <= 1
///        0              v >= 1
/// ```
///
/// `h''` is 1 on `[0, 1)` and 0 elsewhere (the right limit at `v = 1`).
#[inline]
pub fn hinge_h(v: f64) -> (f64, f64, f64) {
    if v < 0.0 {
        (0.5 - v, -1.0, 0.0)
    } else if v < 1.0 {
        let t = 1.0 - v;
        (0.5 * t * t, -t, 1.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

#[inline]
fn hinge_d1(v: f64) -> f64 {
    if v <= 0.0 {
        -1.0
    } else if v < 1.0 {
        v - 1.0
    } else {
        0.0
    }
}

#[inline]
fn hinge_d2(v: f64) -> f64 {
    if (0.0..1.0).contains(&v) {
        1.0
    } else {
        0.0
    }
}

/// Integral of `h'` over `[p, q]` with `p <= q`, split at the breakpoints.
#[inline]
fn hinge_integral(p: f64, q: f64) -> f64 {
    let mut total = 0.0;
    if p < 0.0 {
        total -= q.min(0.0) - p;
    }
    let lo = p.max(0.0);
    let hi = q.min(1.0);
    if lo < hi {
        total += (hi - lo) * (0.5 * ((lo - 1.0) + (hi - 1.0)));
    }
    total
}

/// `h(u + w) - h(u)`, exact to rounding even when `|w|` is tiny.
#[inline]
pub fn hinge_diff(u: f64, w: f64) -> f64 {
    let v = u + w;
    if (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v) {
        // Common case: both ends on the quadratic piece.
        // `u - 1` first: exact near the kink at 1, where the sum would cancel.
        return w * ((u - 1.0) + 0.5 * w);
    }
    if u < 0.0 && v < 0.0 {
        return -w;
    }
    if u >= 1.0 && v >= 1.0 {
        return 0.0;
    }
    // Across a kink `v` itself is rounded; `e` is what rounding dropped.
    let e = w - (v - u) + (u - (v - (v - u)));
    let crossing = if w >= 0.0 {
        hinge_integral(u, v)
    } else {
        -hinge_integral(v, u)
    };
    crossing + hinge_d1(v) * e
}

/// Synthetic two-class data shared by every regularization weight.
///
/// Row `i` of `A` is `b_i [1, ..., 1] / sqrt(n) + w_i` with `b_i = +-1` and
/// `w_i ~ N(0, sigma^2 I)`. Only the label-scaled rows `b_i a_i` enter the
/// objective, so those are what is stored.
#[derive(Debug)]
pub struct HingeData {
    m: usize,
    n: usize,
    signed: Vec<f64>,
    labels: Vec<f64>,
    gram: OnceLock<Vec<f64>>,
    top_eigenvalue: OnceLock<f64>,
    row_norms: OnceLock<Vec<f64>>,
}

impl HingeData {
    /// Labels and noise come from one seeded stream: for each row, a coin
    /// flip followed by `n` Gaussians.
    pub fn generate(m: usize, n: usize, noise_sigma: f64, seed: u64) -> Result<Self, ProblemError> {
        if m == 0 || n == 0 {
            return Err(ProblemError::InvalidParameter {
                name: "size",
                value: 0.0,
            });
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(ProblemError::InvalidParameter {
                name: "noise_sigma",
                value: noise_sigma,
            });
        }
        let mut g = Gaussian::seed_from_u64(seed);
        let base = 1.0 / (n as f64).sqrt();
        let mut signed = Vec::with_capacity(m * n);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let b = if g.coin() { 1.0 } else { -1.0 };
            labels.push(b);
            for _ in 0..n {
                let a = b * base + noise_sigma * g.sample();
                signed.push(b * a);
            }
        }
        Ok(Self::from_parts(m, n, signed, labels))
    }

    /// From an unscaled row-major matrix `A` and labels `b`.
    pub fn from_matrix(
        m: usize,
        n: usize,
        a: &[f64],
        labels: &[f64],
    ) -> Result<Self, ProblemError> {
        check_dim(m * n, a.len())?;
        check_dim(m, labels.len())?;
        if let Some(&bad) = labels.iter().find(|b| b.abs() != 1.0) {
            return Err(ProblemError::InvalidParameter {
                name: "label",
                value: bad,
            });
        }
        let signed = a
            .chunks_exact(n)
            .zip(labels)
            .flat_map(|(row, b)| row.iter().map(move |v| b * v))
            .collect();
        Ok(Self::from_parts(m, n, signed, labels.to_vec()))
    }

    fn from_parts(m: usize, n: usize, signed: Vec<f64>, labels: Vec<f64>) -> Self {
        Self {
            m,
            n,
            signed,
            labels,
            gram: OnceLock::new(),
            top_eigenvalue: OnceLock::new(),
            row_norms: OnceLock::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// `b_i a_i`.
    #[inline]
    pub fn signed_row(&self, i: usize) -> &[f64] {
        &self.signed[i * self.n..(i + 1) * self.n]
    }

    pub fn signed_rows(&self) -> &[f64] {
        &self.signed
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row `i` of the unscaled matrix `A`.
    pub fn matrix_row(&self, i: usize) -> Vec<f64> {
        self.signed_row(i)
            .iter()
            .map(|v| self.labels[i] * v)
            .collect()
    }

    /// `sum_i (b_i a_i)(b_i a_i)'`, row-major `n x n`, computed once.
    pub fn gram(&self) -> &[f64] {
        self.gram.get_or_init(|| {
            let (m, n) = (self.m, self.n);
            // Column-major n x m view of the row-major data is A'; a strided view is A.
            let at = DMatrixView::from_slice(&self.signed, n, m);
            let a = DMatrixView::<f64, Dyn, Dyn>::from_slice_with_strides(&self.signed, m, n, n, 1);
            let mut g = DMatrix::<f64>::zeros(n, n);
            g.gemm(1.0, &at, &a, 0.0);
            g.as_slice().to_vec()
        })
    }

    /// Largest eigenvalue of `A'A`.
    pub fn top_eigenvalue(&self) -> f64 {
        *self.top_eigenvalue.get_or_init(|| {
            let n = self.n;
            let gram = self.gram();
            power_iteration(
                n,
                |v, w| {
                    for (i, wi) in w.iter_mut().enumerate() {
                        *wi = linalg::dot(&gram[i * n..(i + 1) * n], v);
                    }
                },
                1e-13,
                100_000,
            )
        })
    }

    pub fn row_norms(&self) -> &[f64] {
        self.row_norms
            .get_or_init(|| self.signed.chunks_exact(self.n).map(linalg::norm).collect())
    }

    /// Signed margins `b_i a_i'x` for every row.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.signed
            .chunks_exact(self.n)
            .map(|row| linalg::dot(row, x))
            .collect()
    }
}

/// `f(x) = sum_i h(b_i a_i'x) + lambda |x|^2 / 2`.
#[derive(Debug, Clone)]
pub struct HingeLoss {
    data: Arc<HingeData>,
    lambda: f64,
    big_l: f64,
}

impl HingeLoss {
    /// `ell = lambda` and `L = lambda + lambda_max(A'A)` since `0 <= h'' <= 1`.
    pub fn new(data: Arc<HingeData>, lambda: f64) -> Result<Self, ProblemError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        let big_l = lambda + data.top_eigenvalue();
        log::info!(
            "hinge m={} n={} lambda={lambda:e}: ell = {lambda:.6e}, L = {big_l:.6e}",
            data.rows(),
            data.cols()
        );
        Ok(Self {
            data,
            lambda,
            big_l,
        })
    }

    pub fn data(&self) -> &Arc<HingeData> {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Objective for HingeLoss {
    fn dim(&self) -> usize {
        self.data.n
    }

    fn ell(&self) -> f64 {
        self.lambda
    }

    fn big_l(&self) -> f64 {
        self.big_l
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for row in self.data.signed.chunks_exact(self.data.n) {
            acc.add(hinge_h(linalg::dot(row, x)).0);
        }
        acc.add(0.5 * self.lambda * linalg::norm_sq(x));
        acc.total()
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.value_and_gradient(x, g);
    }

    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        g.fill(0.0);
        let mut acc = CompensatedSum::new();
        for row in self.data.signed.chunks_exact(self.data.n) {
            let (h, d1, _) = hinge_h(linalg::dot(row, x));
            acc.add(h);
            if d1 != 0.0 {
                linalg::axpy(d1, row, g);
            }
        }
        linalg::axpy(self.lambda, x, g);
        acc.add(0.5 * self.lambda * linalg::norm_sq(x));
        acc.total()
    }

    fn hessian_vec_into(&self, x: &[f64], d: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for row in self.data.signed.chunks_exact(self.data.n) {
            if hinge_d2(linalg::dot(row, x)) != 0.0 {
                linalg::axpy(linalg::dot(row, d), row, out);
            }
        }
        linalg::axpy(self.lambda, d, out);
    }

    fn value_difference(&self, x: &[f64], s: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for row in self.data.signed.chunks_exact(self.data.n) {
            acc.add(hinge_diff(linalg::dot(row, x), linalg::dot(row, s)));
        }
        for (xi, si) in x.iter().zip(s) {
            acc.add(self.lambda * si * (xi + 0.5 * si));
        }
        acc.total()
    }

    fn line<'a>(&'a self, origin: &'a [f64], dir: &'a [f64]) -> Box<dyn LineRestriction + 'a> {
        let (u, v): (Vec<f64>, Vec<f64>) = self
            .data
            .signed
            .chunks_exact(self.data.n)
            .map(|row| (linalg::dot(row, origin), linalg::dot(row, dir)))
            .unzip();
        Box::new(HingeLine::new(u, v, origin, dir, self.lambda))
    }
}

/// The hinge objective along a line, reduced to the margins `u_i + alpha v_i`.
pub(crate) struct HingeLine {
    u: Vec<f64>,
    v: Vec<f64>,
    lambda: f64,
    od: f64,
    dd: f64,
    od_terms: Vec<f64>,
}

impl HingeLine {
    pub(crate) fn new(u: Vec<f64>, v: Vec<f64>, origin: &[f64], dir: &[f64], lambda: f64) -> Self {
        let od_terms: Vec<f64> = origin.iter().zip(dir).map(|(o, d)| o * d).collect();
        Self {
            u,
            v,
            lambda,
            od: linalg::compensated_sum(od_terms.iter().copied()),
            dd: linalg::norm_sq(dir),
            od_terms,
        }
    }
}

impl LineRestriction for HingeLine {
    fn derivatives(&mut self, alpha: f64) -> (f64, f64) {
        let mut slope = 0.0;
        let mut curv = 0.0;
        for (&u, &v) in self.u.iter().zip(&self.v) {
            let t = u + alpha * v;
            slope += hinge_d1(t) * v;
            curv += hinge_d2(t) * v * v;
        }
        (
            slope + self.lambda * (self.od + alpha * self.dd),
            curv + self.lambda * self.dd,
        )
    }

    fn value_change(&mut self, alpha: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&u, &v) in self.u.iter().zip(&self.v) {
            acc.add(hinge_diff(u, alpha * v));
        }
        for t in &self.od_terms {
            acc.add(self.lambda * alpha * t);
        }
        acc.add(0.5 * self.lambda * alpha * alpha * self.dd);
        acc.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_values() {
        assert_eq!(hinge_h(0.0), (0.5, -1.0, 1.0));
        assert_eq!(hinge_h(1.0), (0.0, 0.0, 0.0));
        assert_eq!(hinge_h(0.5), (0.125, -0.5, 1.0));
        assert_eq!(hinge_h(-2.0), (2.5, -1.0, 0.0));
        assert_eq!(hinge_h(3.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hinge_diff_matches_naive_on_every_piece() {
        let points = [-2.0, -0.3, 0.0, 0.2, 0.7, 1.0, 1.5];
        for &u in &points {
            for &v in &points {
                let naive = hinge_h(v).0 - hinge_h(u).0;
                let got = hinge_diff(u, v - u);
                assert!((got - naive).abs() < 1e-15, "u={u} v={v}: {got} vs {naive}");
            }
        }
    }

    #[test]
    fn hinge_diff_keeps_tiny_steps() {
        let u = 0.3;
        let w = 1e-12;
        // h'(0.3) = -0.7
        assert!((hinge_diff(u, w) / w + 0.7).abs() < 1e-10);
        assert_eq!(hinge_diff(-1.0, 1e-20), -1e-20);
    }

    #[test]
    fn noiseless_rows() {
        let data = HingeData::generate(50, 9, 0.0, 3).unwrap();
        for i in 0..50 {
            for v in data.signed_row(i) {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
            let raw = data.matrix_row(i);
            assert!((raw[0] - data.labels()[i] / 3.0).abs() < 1e-15);
        }
        // Any x with positive entries classifies every point with margin.
        let m = data.margins(&[1.0; 9]);
        assert!(m.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = HingeData::generate(100, 7, 0.4, 11).unwrap();
        let b = HingeData::generate(100, 7, 0.4, 11).unwrap();
        assert_eq!(a.signed_rows(), b.signed_rows());
        let c = HingeData::generate(100, 7, 0.4, 12).unwrap();
        assert_ne!(a.signed_rows(), c.signed_rows());
    }

    #[test]
    fn gram_and_top_eigenvalue() {
        let data = HingeData::generate(300, 6, 0.4, 1).unwrap();
        let gram = data.gram();
        for i in 0..6 {
            for j in 0..6 {
                let direct: f64 = (0..300)
                    .map(|r| data.signed_row(r)[i] * data.signed_row(r)[j])
                    .sum();
                assert!((gram[i * 6 + j] - direct).abs() < 1e-10 * (1.0 + direct.abs()));
            }
        }
        let dense = DMatrix::from_row_slice(6, 6, gram)
            .symmetric_eigen()
            .eigenvalues
            .max();
        assert!((data.top_eigenvalue() - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn line_matches_generic() {
        let data = Arc::new(HingeData::generate(500, 8, 0.4, 5).unwrap());
        let p = HingeLoss::new(data, 0.03).unwrap();
        let o: Vec<f64> = (0..8).map(|i| 0.2 * i as f64 - 0.5).collect();
        let d: Vec<f64> = (0..8).map(|i| 1.0 - 0.1 * i as f64).collect();
        let mut fast = p.line(&o, &d);
        let mut slow = crate::problems::GenericLine::new(&p, &o, &d);
        for alpha in [0.0, 0.1, 0.7] {
            let (a1, b1) = fast.derivatives(alpha);
            let (a2, b2) = slow.derivatives(alpha);
            assert!((a1 - a2).abs() < 1e-10 * (1.0 + a2.abs()));
            assert!((b1 - b2).abs() < 1e-10 * (1.0 + b2.abs()));
            let (v1, v2) = (fast.value_change(alpha), slow.value_change(alpha));
            assert!((v1 - v2).abs() < 1e-11 * (1.0 + v2.abs()));
        }
    }
}
