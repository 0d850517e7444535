//! Independent numeric oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Unit ball volume by the two-step recurrence `V_m = 2 pi V_{m-2} / m`.
pub fn ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI * ball_volume(m - 2) / m as f64,
    }
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Composite Gauss-Legendre quadrature over `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let width = (hi - lo) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        let panel: f64 = GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        sum += half * panel;
    }
    sum
}

/// Bisection for an increasing function with `f(lo) < 0 < f(hi)`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Positive root in `omega` of
/// `int_{lower}^{phi} e^{omega y} v e^{-v a} e^{-v y} dy = 1`, `a = d_alpha^m`,
/// found by quadrature and bisection.
pub fn omega0_numeric(m: usize, d_alpha: f64, phi: f64, lower: f64) -> f64 {
    let v = ball_volume(m);
    let a = d_alpha.powi(m as i32);
    let theta = v * (-v * a).exp();
    let g = |omega: f64| {
        integrate(|y| theta * ((omega - v) * y).exp(), lower, phi, 400) - 1.0
    };
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect(g, 0.0, hi)
}

/// The root with the integral starting at zero.
pub fn omega0_from_zero(m: usize, d_alpha: f64, phi: f64) -> f64 {
    omega0_numeric(m, d_alpha, phi, 0.0)
}

/// The root with the integral starting at the evidence lower bound `-d_alpha^m`.
pub fn omega0_from_lower_bound(m: usize, d_alpha: f64, phi: f64) -> f64 {
    omega0_numeric(m, d_alpha, phi, -d_alpha.powi(m as i32))
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The acceptance grid for the exponent root.
pub const OMEGA_GRID_M: [usize; 4] = [1, 2, 4, 8];
pub const OMEGA_GRID_D_ALPHA: [f64; 3] = [0.01, 0.1, 0.5];
pub const OMEGA_GRID_PHI: [f64; 3] = [0.5, 1.0, 5.0];
