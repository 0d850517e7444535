//! Nominal kNN baseline: reference set, percentile distance and evidence bound.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_K: usize = 1;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.5;

/// Everything the detector needs from nominal training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnCalibration {
    /// Kept sorted by the first coordinate.
    #[serde(deserialize_with = "deserialize_sorted")]
    reference: TimeSeries,
    pub d_alpha: f64,
    pub phi: f64,
    pub k: usize,
    pub significance_level: f64,
    pub n_calibration: usize,
    pub phi_multiplier: f64,
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnOptions {
    pub k: usize,
    pub alpha: f64,
    /// Scales the empirical evidence maximum; must be at least 1.
    pub phi_multiplier: f64,
}

impl Default for KnnOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            phi_multiplier: 1.0,
        }
    }
}

impl KnnCalibration {
    /// Calibrates from an explicit reference/calibration partition.
    pub fn from_partition(
        reference: TimeSeries,
        calibration: &TimeSeries,
        opts: KnnOptions,
    ) -> Result<Self> {
        validate_options(&opts)?;
        if reference.dims() != calibration.dims() {
            return Err(Error::validation(format!(
                "reference has {} dimensions, calibration points have {}",
                reference.dims(),
                calibration.dims()
            )));
        }
        if reference.len() < opts.k {
            return Err(Error::validation(format!(
                "reference set of {} points cannot supply k = {} neighbours",
                reference.len(),
                opts.k
            )));
        }
        let reference = sort_by_first_coordinate(&reference);
        let m = reference.dims() as i32;
        let distances: Vec<f64> = calibration
            .rows()
            .map(|q| kth_distance(&reference, q, opts.k))
            .collect();
        let d_alpha = nearest_rank(&distances, 1.0 - opts.alpha);
        let max_power = distances
            .iter()
            .map(|d| d.powi(m))
            .fold(f64::NEG_INFINITY, f64::max);
        let phi = opts.phi_multiplier * (max_power - d_alpha.powi(m));
        if phi.is_nan() || phi <= 0.0 {
            return Err(Error::DegenerateCalibration(format!(
                "evidence upper bound phi = {phi}; calibration distances do not spread above d_alpha"
            )));
        }
        Ok(Self {
            reference,
            d_alpha,
            phi,
            k: opts.k,
            significance_level: opts.alpha,
            n_calibration: calibration.len(),
            phi_multiplier: opts.phi_multiplier,
            split_seed: None,
        })
    }

    pub fn reference(&self) -> &TimeSeries {
        &self.reference
    }

    /// Feature dimension `m`.
    pub fn dims(&self) -> usize {
        self.reference.dims()
    }

    pub fn n_reference(&self) -> usize {
        self.reference.len()
    }

    /// `d_alpha^m`, the lower bound of the evidence magnitude.
    pub fn baseline(&self) -> f64 {
        self.d_alpha.powi(self.dims() as i32)
    }

    /// Anomaly evidence `d_t^m - d_alpha^m` for one feature vector.
    pub fn evidence(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims() {
            return Err(Error::validation(format!(
                "feature vector has {} entries, calibration expects {}",
                x.len(),
                self.dims()
            )));
        }
        Ok(self.evidence_unchecked(x))
    }

    fn evidence_unchecked(&self, x: &[f64]) -> f64 {
        let d = kth_distance(&self.reference, x, self.k);
        d.powi(self.dims() as i32) - self.baseline()
    }

    pub fn evidence_stream(&self, features: &TimeSeries) -> Result<Vec<f64>> {
        if features.dims() != self.dims() {
            return Err(Error::validation(format!(
                "features have {} dimensions, calibration expects {}",
                features.dims(),
                self.dims()
            )));
        }
        Ok(features.rows().map(|x| self.evidence_unchecked(x)).collect())
    }

    /// The bound only follows from theory for the nearest neighbour.
    pub fn bound_is_heuristic(&self) -> bool {
        self.k != 1
    }
}

fn validate_options(opts: &KnnOptions) -> Result<()> {
    if opts.k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::validation(format!(
            "significance level must lie in (0, 1), got {}",
            opts.alpha
        )));
    }
    if !(opts.phi_multiplier >= 1.0 && opts.phi_multiplier.is_finite()) {
        return Err(Error::validation(format!(
            "phi multiplier must be >= 1, got {}",
            opts.phi_multiplier
        )));
    }
    Ok(())
}

/// Randomly partitions the nominal features into calibration points
/// (`split_ratio` of them) and a reference set, then calibrates.
pub fn fit_knn(
    nominal: &TimeSeries,
    split_ratio: f64,
    opts: KnnOptions,
    seed: u64,
) -> Result<KnnCalibration> {
    validate_options(&opts)?;
    if nominal.len() < 4 {
        return Err(Error::validation(format!(
            "need at least 4 nominal points, got {}",
            nominal.len()
        )));
    }
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::validation(format!(
            "split ratio must lie in (0, 1), got {split_ratio}"
        )));
    }
    let n = nominal.len();
    let n1 = ((split_ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let gather = |idx: &[usize]| {
        let flat = idx
            .iter()
            .flat_map(|&i| nominal.row(i).iter().copied())
            .collect();
        TimeSeries::from_flat(idx.len(), nominal.dims(), flat)
    };
    let calibration = gather(&order[..n1])?;
    let reference = gather(&order[n1..])?;
    let mut calib = KnnCalibration::from_partition(reference, &calibration, opts)?;
    calib.split_seed = Some(seed);
    Ok(calib)
}

/// k-th nearest Euclidean distance from each query row into `reference`.
pub fn knn_distances(reference: &TimeSeries, queries: &TimeSeries, k: usize) -> Result<Vec<f64>> {
    if k == 0 || reference.len() < k {
        return Err(Error::validation(format!(
            "cannot take the {k}-th neighbour among {} points",
            reference.len()
        )));
    }
    if reference.dims() != queries.dims() {
        return Err(Error::validation("reference and query dimensions differ"));
    }
    let sorted = sort_by_first_coordinate(reference);
    Ok(queries.rows().map(|q| kth_distance(&sorted, q, k)).collect())
}

fn deserialize_sorted<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<TimeSeries, D::Error> {
    TimeSeries::deserialize(d).map(|t| sort_by_first_coordinate(&t))
}

fn sort_by_first_coordinate(series: &TimeSeries) -> TimeSeries {
    let mut rows: Vec<&[f64]> = series.rows().collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let flat = rows.iter().flat_map(|r| r.iter().copied()).collect();
    TimeSeries::from_flat(series.len(), series.dims(), flat).expect("same shape")
}

/// `reference` must be sorted by its first coordinate. The scan walks
/// outwards from the query's position and stops once the first-coordinate
/// gap alone exceeds the current k-th best distance.
fn kth_distance(reference: &TimeSeries, x: &[f64], k: usize) -> f64 {
    let n = reference.len();
    let sq = |r: &[f64]| -> f64 { r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum() };
    let start = {
        let (mut lo, mut hi) = (0, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if reference.row(mid)[0] < x[0] {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    };
    // ascending buffer of the k smallest squared distances
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    let offer = |d: f64, best: &mut Vec<f64>| {
        if best.len() < k || d < best[k - 1] {
            let pos = best.partition_point(|&b| b <= d);
            best.insert(pos, d);
            best.truncate(k);
        }
    };
    let (mut up, mut down) = (start, start);
    loop {
        let bound = if best.len() == k { best[k - 1] } else { f64::INFINITY };
        let gap_up = (up < n).then(|| reference.row(up)[0] - x[0]);
        let gap_down = (down > 0).then(|| x[0] - reference.row(down - 1)[0]);
        let take_up = match (gap_up, gap_down) {
            (None, None) => break,
            (Some(u), Some(d)) => u <= d,
            (Some(_), None) => true,
            (None, Some(_)) => false,
        };
        let gap = if take_up { gap_up } else { gap_down }.unwrap_or(0.0);
        if gap * gap > bound {
            break;
        }
        let r = if take_up {
            up += 1;
            reference.row(up - 1)
        } else {
            down -= 1;
            reference.row(down)
        };
        offer(sq(r), &mut best);
    }
    best[k - 1].sqrt()
}

/// Empirical `q`-quantile: element `floor(q n)` (0-based) of the sorted sample,
/// clamped to the last element.
pub fn nearest_rank(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let idx = ((q * n as f64 + 1e-9).floor() as usize).min(n - 1);
    sorted[idx]
}
