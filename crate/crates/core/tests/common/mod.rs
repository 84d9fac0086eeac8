//! Independent quadrature oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Composite Gauss-Legendre over `[lo, hi]` split into `panels` equal pieces.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    panels: usize,
    rule: &[(f64, f64)],
) -> f64 {
    let h = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = lo + (p as f64 + 0.5) * h;
            rule.iter()
                .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// `∫_0^∞ k(y) [g(u + y) + g(u - y)] dy` for a kernel `k` decaying on the
/// length `r`, truncated at `60 r`.
pub fn even_kernel_convolution(
    g: impl Fn(f64) -> f64,
    k: impl Fn(f64) -> f64,
    u: f64,
    r: f64,
) -> f64 {
    let rule = gauss_legendre(32);
    integrate(|y| k(y) * (g(u + y) + g(u - y)), 0.0, 60.0 * r, 240, &rule)
}

pub fn tanh_d2(x: f64) -> f64 {
    let sech = 1.0 / x.cosh();
    -2.0 * x.tanh() * sech * sech
}

/// `s^{-5/2} Wf(u, s) / K` for the feedforward wavelet with spreads `a`, `b`,
/// written as `f''` smoothed by the low-pass `1/((1 + a²s²λ²)(1 + b²s²λ²))`.
///
/// The low-pass is `A/(A-B)·e_A - B/(A-B)·e_B` in partial fractions, with
/// `e_r(x) = e^{-|x|/r}/(2r)` and `A = as`, `B = bs`.
pub fn smoothed_second_derivative(
    d2: impl Fn(f64) -> f64 + Copy,
    u: f64,
    s: f64,
    a: f64,
    b: f64,
) -> f64 {
    let (ra, rb) = (a * s, b * s);
    let (a2, b2) = (ra * ra, rb * rb);
    let e = |r: f64| move |y: f64| (-y / r).exp() / (2.0 * r);
    let narrow = even_kernel_convolution(d2, e(ra), u, ra);
    let broad = even_kernel_convolution(d2, e(rb), u, rb);
    (a2 * narrow - b2 * broad) / (a2 - b2)
}
