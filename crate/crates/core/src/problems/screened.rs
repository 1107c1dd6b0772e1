//! Hinge-loss evaluation that skips rows whose piece of `h` is known.
//!
//! Each row's margin `v_i = b_i a_i'x` selects one of the three pieces of `h`
//! (linear, quadratic, zero). Given a reference point `x_ref` with margins
//! `v_ref`, the margin at `x` differs by at most `|a_i| |x - x_ref|`, so rows
//! far from a breakpoint keep their piece. The sum over rows with a fixed
//! piece is an affine/quadratic function of `x` with precomputed data
//! (`G_Q = sum_Q a_i a_i'`, `s_Q`, `s_N`), and only the remaining rows need an
//! explicit inner product. When too many rows become uncertain the reference
//! point moves to the current query.
//!
//! Results agree with [`HingeLoss`] up to rounding.

use super::hinge::{hinge_diff, HingeLoss};
use super::{LineRestriction, Objective};
use crate::linalg::{self, CompensatedSum};
use nalgebra::{DMatrix, DMatrixView};
use std::cell::{Cell, RefCell};

const N: u8 = 0;
const Q: u8 = 1;
const Z: u8 = 2;

/// Rows gathered per matrix product when updating `G_Q`.
const CHUNK: usize = 4096;

#[inline]
fn classify(v: f64) -> u8 {
    if v < 0.0 {
        N
    } else if v < 1.0 {
        Q
    } else {
        Z
    }
}

#[inline]
fn coef(c: u8, v: f64) -> f64 {
    match c {
        N => -1.0,
        Q => v - 1.0,
        _ => 0.0,
    }
}

#[inline]
fn piece_value(c: u8, v: f64) -> f64 {
    match c {
        N => 0.5 - v,
        Q => 0.5 * (1.0 - v) * (1.0 - v),
        _ => 0.0,
    }
}

#[inline]
fn piece_diff(c: u8, v: f64, w: f64) -> f64 {
    match c {
        N => -w,
        Q => w * (v + 0.5 * w - 1.0),
        _ => 0.0,
    }
}

#[inline]
fn distance_to_breakpoint(c: u8, v: f64) -> f64 {
    match c {
        N => -v,
        Q => v.min(1.0 - v),
        _ => v - 1.0,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScreenStats {
    pub queries: u64,
    pub references: u64,
    pub uncertain_rows: u64,
}

struct Reference {
    x: Vec<f64>,
    class: Vec<u8>,
    /// Rows sorted by `keys`.
    order: Vec<u32>,
    /// Radius `|x - x_ref|` beyond which the row may change piece, ascending.
    keys: Vec<f64>,
    gram_q: Vec<f64>,
    sum_q: Vec<f64>,
    sum_n: Vec<f64>,
    count_q: usize,
    count_n: usize,
    /// Rows examined since the reference was set.
    debt: usize,
    /// Rank-one updates applied to `gram_q` since it was last rebuilt.
    drift: usize,
}

/// A [`HingeLoss`] evaluator with a per-run cache. Not shareable across threads.
pub struct ScreenedHinge<'a> {
    problem: &'a HingeLoss,
    reference: RefCell<Option<Reference>>,
    stats: Cell<ScreenStats>,
}

impl<'a> ScreenedHinge<'a> {
    pub fn new(problem: &'a HingeLoss) -> Self {
        Self {
            problem,
            reference: RefCell::new(None),
            stats: Cell::new(ScreenStats::default()),
        }
    }

    pub fn stats(&self) -> ScreenStats {
        self.stats.get()
    }

    fn n(&self) -> usize {
        self.problem.data().cols()
    }

    fn m(&self) -> usize {
        self.problem.data().rows()
    }

    /// `gram += sign * sum_{i in rows} a_i a_i'`.
    fn accumulate(&self, gram: &mut [f64], rows: &[usize], sign: f64) {
        let n = self.n();
        let data = self.problem.data();
        let mut buf = Vec::with_capacity(CHUNK.min(rows.len()) * n);
        let mut g = DMatrix::from_column_slice(n, n, gram);
        for chunk in rows.chunks(CHUNK) {
            buf.clear();
            for &i in chunk {
                buf.extend_from_slice(data.signed_row(i));
            }
            // Column-major n x k view of k gathered rows.
            let at = DMatrixView::from_slice(&buf, n, chunk.len());
            g.gemm(sign, &at, &at.transpose(), 1.0);
        }
        gram.copy_from_slice(g.as_slice());
    }

    /// Makes `x` the reference point.
    fn rereference(&self, slot: &mut Option<Reference>, x: &[f64]) {
        let (m, n) = (self.m(), self.n());
        let data = self.problem.data();
        let norms = data.row_norms();
        let mut class = Vec::with_capacity(m);
        let mut raw_keys = Vec::with_capacity(m);
        let mut sum_q = vec![0.0; n];
        let mut sum_n = vec![0.0; n];
        let (mut count_q, mut count_n) = (0, 0);
        for i in 0..m {
            let row = data.signed_row(i);
            let v = linalg::dot(row, x);
            let c = classify(v);
            match c {
                N => {
                    linalg::axpy(1.0, row, &mut sum_n);
                    count_n += 1;
                }
                Q => {
                    linalg::axpy(1.0, row, &mut sum_q);
                    count_q += 1;
                }
                _ => {}
            }
            class.push(c);
            // A small allowance for rounding in the stored margin.
            let slack = distance_to_breakpoint(c, v) - 1e-12 * (1.0 + v.abs());
            raw_keys.push(if norms[i] > 0.0 {
                slack / norms[i]
            } else {
                f64::INFINITY
            });
        }
        let mut order: Vec<u32> = (0..m as u32).collect();
        order.sort_unstable_by(|&a, &b| raw_keys[a as usize].total_cmp(&raw_keys[b as usize]));
        let keys = order.iter().map(|&i| raw_keys[i as usize]).collect();

        let (gram_q, drift) = match slot.take() {
            Some(old) if old.drift < m => {
                let mut gram = old.gram_q;
                let mut added = Vec::new();
                let mut removed = Vec::new();
                for i in 0..m {
                    match (old.class[i] == Q, class[i] == Q) {
                        (false, true) => added.push(i),
                        (true, false) => removed.push(i),
                        _ => {}
                    }
                }
                self.accumulate(&mut gram, &added, 1.0);
                self.accumulate(&mut gram, &removed, -1.0);
                (gram, old.drift + added.len() + removed.len())
            }
            _ => {
                let rows: Vec<usize> = (0..m).filter(|&i| class[i] == Q).collect();
                let mut gram = vec![0.0; n * n];
                self.accumulate(&mut gram, &rows, 1.0);
                (gram, 0)
            }
        };
        *slot = Some(Reference {
            x: x.to_vec(),
            class,
            order,
            keys,
            gram_q,
            sum_q,
            sum_n,
            count_q,
            count_n,
            debt: 0,
            drift,
        });
        let mut s = self.stats.get();
        s.references += 1;
        self.stats.set(s);
    }

    /// Reference valid for every point within `radius` of it (after possibly
    /// moving it to `x`), with the uncertain rows for that radius.
    fn prepare<R>(
        &self,
        x: &[f64],
        radius_to: &[&[f64]],
        f: impl FnOnce(&Reference, &[u32]) -> R,
    ) -> R {
        let mut slot = self.reference.borrow_mut();
        let m = self.m();
        let count = |r: &Reference| {
            let radius = radius_to
                .iter()
                .map(|p| linalg::dist_sq(p, &r.x).sqrt())
                .fold(0.0, f64::max);
            r.keys.partition_point(|&k| k <= radius)
        };
        let stale = match slot.as_ref() {
            None => true,
            Some(r) => {
                let u = count(r);
                u > m / 4 || r.debt + u > m
            }
        };
        if stale {
            self.rereference(&mut slot, x);
        }
        let r = slot.as_mut().expect("reference set");
        let u = count(r);
        r.debt += u;
        let mut s = self.stats.get();
        s.queries += 1;
        s.uncertain_rows += u as u64;
        self.stats.set(s);
        f(r, &r.order[..u])
    }

    fn gram_times(r: &Reference, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = linalg::dot(&r.gram_q[i * n..(i + 1) * n], x);
        }
    }
}

impl Objective for ScreenedHinge<'_> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn ell(&self) -> f64 {
        self.problem.ell()
    }

    fn big_l(&self) -> f64 {
        self.problem.big_l()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let data = self.problem.data();
        let lambda = self.problem.lambda();
        self.prepare(x, &[x], |r, uncertain| {
            let mut gx = vec![0.0; x.len()];
            Self::gram_times(r, x, &mut gx);
            let mut acc = CompensatedSum::new();
            acc.add(0.5 * (r.count_n + r.count_q) as f64);
            acc.add(-linalg::dot(&r.sum_n, x));
            acc.add(-linalg::dot(&r.sum_q, x));
            acc.add(0.5 * linalg::dot(&gx, x));
            acc.add(0.5 * lambda * linalg::norm_sq(x));
            for &i in uncertain {
                let i = i as usize;
                let v = linalg::dot(data.signed_row(i), x);
                let c = classify(v);
                if c != r.class[i] {
                    acc.add(piece_value(c, v) - piece_value(r.class[i], v));
                }
            }
            acc.total()
        })
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        let data = self.problem.data();
        let lambda = self.problem.lambda();
        self.prepare(x, &[x], |r, uncertain| {
            Self::gram_times(r, x, g);
            for (((gi, q), nn), xi) in g.iter_mut().zip(&r.sum_q).zip(&r.sum_n).zip(x) {
                *gi += lambda * xi - q - nn;
            }
            for &i in uncertain {
                let i = i as usize;
                let row = data.signed_row(i);
                let v = linalg::dot(row, x);
                let c = classify(v);
                if c != r.class[i] {
                    linalg::axpy(coef(c, v) - coef(r.class[i], v), row, g);
                }
            }
        })
    }

    fn hessian_vec_into(&self, x: &[f64], d: &[f64], out: &mut [f64]) {
        let data = self.problem.data();
        let lambda = self.problem.lambda();
        self.prepare(x, &[x], |r, uncertain| {
            Self::gram_times(r, d, out);
            linalg::axpy(lambda, d, out);
            for &i in uncertain {
                let i = i as usize;
                let row = data.signed_row(i);
                let c = classify(linalg::dot(row, x));
                let was = r.class[i] == Q;
                if (c == Q) != was {
                    let sign = if was { -1.0 } else { 1.0 };
                    linalg::axpy(sign * linalg::dot(row, d), row, out);
                }
            }
        })
    }

    fn value_difference(&self, x: &[f64], s: &[f64]) -> f64 {
        let data = self.problem.data();
        let lambda = self.problem.lambda();
        let xs = linalg::add(x, s);
        self.prepare(x, &[x, &xs], |r, uncertain| {
            let mut gs = vec![0.0; x.len()];
            Self::gram_times(r, s, &mut gs);
            // s'(G_Q x - s_Q - s_N) + s'G_Q s / 2, with s'G_Q x taken as x'(G_Q s).
            let mut acc = CompensatedSum::new();
            acc.add(linalg::dot(&gs, x));
            acc.add(0.5 * linalg::dot(&gs, s));
            for i in 0..x.len() {
                acc.add(-s[i] * (r.sum_q[i] + r.sum_n[i]));
                acc.add(lambda * s[i] * (x[i] + 0.5 * s[i]));
            }
            for &i in uncertain {
                let i = i as usize;
                let row = data.signed_row(i);
                let v = linalg::dot(row, x);
                let w = linalg::dot(row, s);
                acc.add(hinge_diff(v, w) - piece_diff(r.class[i], v, w));
            }
            acc.total()
        })
    }

    fn line<'b>(&'b self, origin: &'b [f64], dir: &'b [f64]) -> Box<dyn LineRestriction + 'b> {
        self.problem.line(origin, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::rng::Gaussian;
    use crate::problems::HingeData;
    use std::sync::Arc;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn agrees_with_direct_evaluation() {
        let data = Arc::new(HingeData::generate(3000, 20, 0.4, 7).unwrap());
        let p = HingeLoss::new(data, 0.03).unwrap();
        let s = ScreenedHinge::new(&p);
        let mut g = Gaussian::seed_from_u64(1);
        let mut x: Vec<f64> = (0..20).map(|_| 0.3 * g.sample()).collect();
        for step in 0..200 {
            // Mostly small moves, with an occasional jump.
            let scale = if step % 37 == 0 { 1.0 } else { 1e-3 };
            for xi in x.iter_mut() {
                *xi += scale * g.sample();
            }
            let d: Vec<f64> = (0..20).map(|_| g.sample()).collect();
            let sm: Vec<f64> = d.iter().map(|v| 1e-4 * v).collect();
            assert!(close(s.value(&x), p.value(&x), 1e-11));
            let (g1, g2) = (s.gradient(&x), p.gradient(&x));
            for (a, b) in g1.iter().zip(&g2) {
                assert!(close(*a, *b, 1e-10), "gradient {a} vs {b}");
            }
            let (h1, h2) = (s.hessian_vec(&x, &d), p.hessian_vec(&x, &d));
            for (a, b) in h1.iter().zip(&h2) {
                assert!(close(*a, *b, 1e-10));
            }
            let (v1, v2) = (s.value_difference(&x, &sm), p.value_difference(&x, &sm));
            assert!(
                (v1 - v2).abs() <= 1e-10 * v2.abs().max(1e-12),
                "{v1} vs {v2}"
            );
        }
        let stats = s.stats();
        assert!(stats.references > 1);
        assert!(stats.uncertain_rows < stats.queries * 3000);
    }
}
