//! kNN-CUSUM sequential detector and its false-alarm calibration.

mod cusum;
mod knn;
mod lambert;
mod theory;

pub use cusum::{cusum_update, detect, statistic_track, CusumDetector, CusumState};
pub use knn::{
    fit_knn, knn_distances, nearest_rank, KnnCalibration, KnnOptions, DEFAULT_ALPHA, DEFAULT_K,
    DEFAULT_SPLIT_RATIO,
};
pub use lambert::{lambert_w, Branch};
pub use theory::{
    ball_volume_constant, calibrate_threshold, compute_omega0, far_bound, solve_omega0,
    Omega0Solution,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Default target false-alarm rate.
pub const DEFAULT_FAR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub omega0: f64,
    pub v_m: f64,
    pub theta: f64,
    pub h: f64,
    pub far_target: f64,
    pub d_alpha: f64,
    pub phi: f64,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub n1: usize,
    pub n2: usize,
    /// Set when `k > 1`, where the bound has no theoretical backing.
    pub bound_is_heuristic: bool,
}

impl CalibrationReport {
    pub fn new(calib: &KnnCalibration, far_target: f64) -> Result<Self> {
        let sol = solve_omega0(calib.dims(), calib.d_alpha, calib.phi)?;
        let h = calibrate_threshold(far_target, sol.omega0)?;
        Ok(Self {
            omega0: sol.omega0,
            v_m: sol.v_m,
            theta: sol.theta,
            h,
            far_target,
            d_alpha: calib.d_alpha,
            phi: calib.phi,
            m: calib.dims(),
            k: calib.k,
            alpha: calib.significance_level,
            n1: calib.n_calibration,
            n2: calib.n_reference(),
            bound_is_heuristic: calib.bound_is_heuristic(),
        })
    }
}
