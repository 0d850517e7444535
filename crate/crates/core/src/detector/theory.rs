//! False-alarm calibration for the kNN-CUSUM detector.
//!
//! Under nominal data the evidence `D = d^m - d_alpha^m` is modelled with
//! density `v_m exp(-v_m d_alpha^m) exp(-v_m y)` bounded above by `phi`, and
//! the CUSUM false-alarm period is at least `exp(omega0 h)` where `omega0`
//! is the positive root of `E[exp(omega D)] = 1`. With `d_alpha^m -> 0` in the
//! lower-limit term the root has the closed form
//! `omega0 = v_m - theta - W(-phi theta e^{-phi theta}) / phi`,
//! `theta = v_m exp(-v_m d_alpha^m)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::lambert::{lambert_w, Branch};
use crate::error::{Error, Result};

/// Volume of the unit ball in `m` dimensions, `pi^{m/2} / Gamma(m/2 + 1)`.
pub fn ball_volume_constant(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::validation("dimension must be at least 1"));
    }
    let half = m as f64 / 2.0;
    Ok((half * PI.ln() - ln_gamma(half + 1.0)).exp())
}

/// Closed-form root with the quantities it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega0Solution {
    pub omega0: f64,
    pub v_m: f64,
    pub theta: f64,
    /// Branch that produced `omega0`; the other returns the trivial root.
    pub branch: Branch,
}

/// Tolerance for recognising the branch value `-phi theta`.
const TRIVIAL_ROOT_TOL: f64 = 1e-9;

pub fn solve_omega0(m: usize, d_alpha: f64, phi: f64) -> Result<Omega0Solution> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::validation(format!("phi must be positive, got {phi}")));
    }
    if !(d_alpha >= 0.0 && d_alpha.is_finite()) {
        return Err(Error::validation(format!(
            "d_alpha must be non-negative, got {d_alpha}"
        )));
    }
    let v_m = ball_volume_constant(m)?;
    let theta = v_m * (-v_m * d_alpha.powi(m as i32)).exp();
    let c = phi * theta;
    if (c - 1.0).abs() <= TRIVIAL_ROOT_TOL {
        return Err(Error::DegenerateCalibration(format!(
            "phi * theta = {c} is 1; the non-trivial root coincides with omega = v_m"
        )));
    }
    let arg = -c * (-c).exp();
    let mut chosen = None;
    for branch in [Branch::Principal, Branch::MinusOne] {
        let w = lambert_w(arg, branch)?;
        // w = -phi*theta gives x = omega - v_m = 0, an artefact of the rearrangement
        if (w + c).abs() <= TRIVIAL_ROOT_TOL * c.max(1.0) {
            continue;
        }
        chosen = Some((w, branch));
    }
    let (w, branch) = chosen.ok_or_else(|| {
        Error::DegenerateCalibration(format!(
            "both Lambert W branches return the trivial root for phi * theta = {c}"
        ))
    })?;
    let omega0 = v_m - theta - w / phi;
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::Calibration(format!(
            "no positive root: omega0 = {omega0}"
        )));
    }
    Ok(Omega0Solution {
        omega0,
        v_m,
        theta,
        branch,
    })
}

pub fn compute_omega0(m: usize, d_alpha: f64, phi: f64) -> Result<f64> {
    solve_omega0(m, d_alpha, phi).map(|s| s.omega0)
}

/// Threshold meeting a target false-alarm rate, `h = -ln(far) / omega0`.
pub fn calibrate_threshold(far_target: f64, omega0: f64) -> Result<f64> {
    if !(far_target > 0.0 && far_target < 1.0) {
        return Err(Error::validation(format!(
            "false-alarm target must lie in (0, 1), got {far_target}"
        )));
    }
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::validation(format!(
            "omega0 must be positive, got {omega0}"
        )));
    }
    Ok(-far_target.ln() / omega0)
}

/// Asymptotic false-alarm rate bound `exp(-omega0 h)`.
pub fn far_bound(h: f64, omega0: f64) -> f64 {
    (-omega0 * h).exp()
}
