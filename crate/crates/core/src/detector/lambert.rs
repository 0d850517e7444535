//! Real branches of the Lambert W function, the inverse of `w -> w e^w`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `W_0`, defined on `[-1/e, inf)` with values `>= -1`.
    Principal,
    /// `W_{-1}`, defined on `[-1/e, 0)` with values `<= -1`.
    MinusOne,
}

/// Evaluates `W(x)` on the requested real branch by Halley iteration.
///
/// Arguments a few ulps below `-1/e` are snapped to the branch point.
pub fn lambert_w(x: f64, branch: Branch) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("Lambert W of NaN".into()));
    }
    let gap = x - BRANCH_POINT;
    if gap < -4.0 * f64::EPSILON * BRANCH_POINT.abs() {
        return Err(Error::Domain(format!("Lambert W undefined below -1/e, got {x}")));
    }
    if gap <= 0.0 {
        return Ok(-1.0);
    }
    match branch {
        Branch::Principal => {
            if x == 0.0 {
                return Ok(0.0);
            }
            if x == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
        }
        Branch::MinusOne => {
            if x >= 0.0 {
                return Err(Error::Domain(format!(
                    "W_-1 is defined on [-1/e, 0), got {x}"
                )));
            }
        }
    }
    Ok(halley(x, initial_guess(x, branch)))
}

fn initial_guess(x: f64, branch: Branch) -> f64 {
    if x < -0.25 {
        // series about the branch point in p = sqrt(2 (e x + 1))
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        let s = match branch {
            Branch::Principal => p,
            Branch::MinusOne => -p,
        };
        return -1.0 + s - s * s / 3.0 + 11.0 / 72.0 * s * s * s;
    }
    match branch {
        Branch::Principal if x < 3.0 => x.ln_1p(),
        Branch::Principal => {
            let l1 = x.ln();
            let l2 = l1.ln();
            l1 - l2 + l2 / l1
        }
        Branch::MinusOne => {
            let l1 = (-x).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(x: f64, w: f64) -> f64 {
        (w * w.exp() - x).abs() / x.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn anchor_values() {
        assert_eq!(lambert_w(0.0, Branch::Principal).unwrap(), 0.0);
        assert!((lambert_w(E, Branch::Principal).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w(-1.0 / E, Branch::MinusOne).unwrap(), -1.0);
        assert_eq!(lambert_w(-1.0 / E, Branch::Principal).unwrap(), -1.0);
    }

    #[test]
    fn omega_constant_matches_fixed_point() {
        // W(1) is the fixed point of w = exp(-w)
        let mut w = 0.5f64;
        for _ in 0..200 {
            w = (-w).exp();
        }
        let got = lambert_w(1.0, Branch::Principal).unwrap();
        assert!((got - w).abs() < 1e-14);
        assert!((got - 0.567_143_290_4).abs() < 1e-10);
    }

    #[test]
    fn branch_ranges() {
        for &x in &[-0.367, -0.3, -0.1, -1e-3, -1e-12] {
            let w0 = lambert_w(x, Branch::Principal).unwrap();
            let wm = lambert_w(x, Branch::MinusOne).unwrap();
            assert!(w0 >= -1.0 && wm <= -1.0, "{x}: {w0} {wm}");
            assert!(residual(x, w0) <= 1e-12, "{x} {w0}");
            assert!(residual(x, wm) <= 1e-12, "{x} {wm}");
        }
    }

    #[test]
    fn large_arguments() {
        for &x in &[3.0, 10.0, 1e3, 1e10, 1e100, 1e300] {
            let w = lambert_w(x, Branch::Principal).unwrap();
            assert!(residual(x, w) <= 1e-12, "{x} {w}");
        }
    }

    #[test]
    fn recovers_both_roots_of_known_product() {
        // x = -c e^{-c}: one branch returns -c exactly
        for c in [0.1f64, 0.5, 0.9, 1.5, 3.0, 10.0] {
            let x = -c * (-c).exp();
            let target = if c < 1.0 { Branch::Principal } else { Branch::MinusOne };
            let w = lambert_w(x, target).unwrap();
            assert!((w + c).abs() < 1e-12 * c.max(1.0), "{c} {w}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(lambert_w(-0.5, Branch::Principal), Err(Error::Domain(_))));
        assert!(matches!(lambert_w(0.1, Branch::MinusOne), Err(Error::Domain(_))));
        assert!(lambert_w(0.0, Branch::MinusOne).is_err());
        assert!(lambert_w(f64::NAN, Branch::Principal).is_err());
    }
}
