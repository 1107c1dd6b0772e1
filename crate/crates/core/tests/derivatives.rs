//! Gradients and Hessian-vector products against central differences, and
//! the strong-convexity sandwich, on every problem family.

use hyncg::linalg;
use hyncg::problems::rng::Gaussian;
use hyncg::problems::{Abpdn, HingeData, HingeLoss, Objective, Quadratic, ScreenedHinge};
use std::sync::Arc;

fn gaussian_vec(g: &mut Gaussian, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * g.sample()).collect()
}

/// Worst relative errors of the gradient and Hessian-vector product over
/// `probes` random points and directions.
fn fd_errors<P: Objective>(p: &P, probes: usize, scale: f64, seed: u64) -> (f64, f64) {
    let mut g = Gaussian::seed_from_u64(seed);
    let n = p.dim();
    let (mut grad_err, mut hvp_err) = (0.0f64, 0.0f64);
    for _ in 0..probes {
        let x = gaussian_vec(&mut g, n, scale);
        let mut d = gaussian_vec(&mut g, n, 1.0);
        let dn = linalg::norm(&d);
        d.iter_mut().for_each(|v| *v /= dn);
        let scale = linalg::norm(&x).max(1.0);
        let h = 1e-5 * scale;
        let xp = linalg::lincomb(1.0, &x, h, &d);
        let xm = linalg::lincomb(1.0, &x, -h, &d);
        let grad = p.gradient(&x);
        let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
        grad_err = grad_err.max((fd - linalg::dot(&grad, &d)).abs() / linalg::norm(&grad));
        // A much shorter stencil for the Hessian: the hinge curvature jumps at
        // the kinks, and a wide stencil straddles some of them.
        let h = 1e-8 * scale;
        let hd = p.hessian_vec(&x, &d);
        let fd_h = linalg::lincomb(
            0.5 / h,
            &p.gradient(&linalg::lincomb(1.0, &x, h, &d)),
            -0.5 / h,
            &p.gradient(&linalg::lincomb(1.0, &x, -h, &d)),
        );
        hvp_err = hvp_err.max(linalg::dist_sq(&fd_h, &hd).sqrt() / linalg::norm(&hd));
    }
    (grad_err, hvp_err)
}

fn small_hinge(lambda: f64) -> HingeLoss {
    let data = HingeData::generate(300, 20, 0.4, 17).unwrap();
    HingeLoss::new(Arc::new(data), lambda).unwrap()
}

#[test]
fn quadratic_derivatives() {
    let q = Quadratic::random_spd(25, 50.0, 3).unwrap();
    let (g, h) = fd_errors(&q, 100, 1.0, 1);
    assert!(g <= 1e-5 && h <= 1e-4, "{g:e} {h:e}");
}

#[test]
fn abpdn_derivatives() {
    for delta in [1e-2, 1e-4] {
        let p = Abpdn::new(256, delta).unwrap();
        let (g, h) = fd_errors(&p, 100, 0.1, 2);
        assert!(g <= 1e-5 && h <= 1e-4, "delta {delta}: {g:e} {h:e}");
    }
}

#[test]
fn hinge_derivatives() {
    let p = small_hinge(0.03);
    let (g, h) = fd_errors(&p, 100, 1.0, 4);
    assert!(g <= 1e-5 && h <= 1e-4, "{g:e} {h:e}");
}

#[test]
fn screened_hinge_matches_direct() {
    let p = small_hinge(0.3);
    let s = ScreenedHinge::new(&p);
    let mut g = Gaussian::seed_from_u64(8);
    let mut x = gaussian_vec(&mut g, 20, 1.0);
    for _ in 0..50 {
        let step = gaussian_vec(&mut g, 20, 0.01);
        linalg::axpy(1.0, &step, &mut x);
        let (f0, f1) = (p.value(&x), s.value(&x));
        assert!((f0 - f1).abs() <= 1e-12 * f0.abs().max(1.0));
        let (g0, g1) = (p.gradient(&x), s.gradient(&x));
        assert!(linalg::dist_sq(&g0, &g1).sqrt() <= 1e-10 * linalg::norm(&g0).max(1.0));
        let d0 = p.value_difference(&x, &step);
        let d1 = s.value_difference(&x, &step);
        assert!((d0 - d1).abs() <= 1e-10 * d0.abs().max(1e-12));
    }
}

/// `ell |u|^2 / 2 <= f(y) - f(x) - grad f(x)'(y - x) <= L |u|^2 / 2` with `u = y - x`.
fn sandwich_violations<P: Objective>(p: &P, pairs: usize, scale: f64, seed: u64) -> usize {
    let mut g = Gaussian::seed_from_u64(seed);
    let n = p.dim();
    let mut bad = 0;
    for _ in 0..pairs {
        let x = gaussian_vec(&mut g, n, scale);
        let u = gaussian_vec(&mut g, n, scale);
        let bregman = p.value_difference(&x, &u) - linalg::dot(&p.gradient(&x), &u);
        let u2 = linalg::norm_sq(&u);
        let slack = 1e-9 * (p.big_l() * u2).max(1e-300);
        if bregman < 0.5 * p.ell() * u2 - slack || bregman > 0.5 * p.big_l() * u2 + slack {
            bad += 1;
        }
    }
    bad
}

#[test]
fn strong_convexity_sandwich() {
    let q = Quadratic::random_spd(20, 1e3, 9).unwrap();
    assert_eq!(sandwich_violations(&q, 1000, 1.0, 10), 0);
    assert_eq!(sandwich_violations(&small_hinge(0.3), 1000, 1.0, 11), 0);
    assert_eq!(sandwich_violations(&small_hinge(0.003), 1000, 1.0, 12), 0);
    // The ABPDN modulus is a bound over the box |x|_inf <= R (R >= 1 here),
    // so sample well inside it.
    let p = Abpdn::new(256, 1e-2).unwrap();
    assert_eq!(sandwich_violations(&p, 1000, 0.05, 13), 0);
}
