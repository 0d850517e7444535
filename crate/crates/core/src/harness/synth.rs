//! Seeded synthetic benchmark streams with injected mean shifts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::DatasetBundle;
use crate::data::{Segment, SegmentSet, TimeSeries};
use crate::error::{Error, Result};
use crate::randomguess::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Independent standard normal entries.
    Iid,
    /// Per-dimension `x_t = rho x_{t-1} + e_t` with unit-variance stationary marginals.
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedSegment {
    pub start: usize,
    pub len: usize,
    /// Added to every dimension inside the segment.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub train_len: usize,
    pub test_len: usize,
    pub dims: usize,
    pub noise: NoiseModel,
    /// Segments inside the test split.
    pub segments: Vec<InjectedSegment>,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<SegmentSet> {
        if self.train_len == 0 || self.test_len == 0 || self.dims == 0 {
            return Err(Error::validation(
                "synthetic lengths and dimension must be positive",
            ));
        }
        if let NoiseModel::Ar1 { rho } = self.noise {
            if rho.is_nan() || rho.abs() >= 1.0 {
                return Err(Error::validation(format!(
                    "AR(1) coefficient must satisfy |rho| < 1, got {rho}"
                )));
            }
        }
        let mut segs = Vec::with_capacity(self.segments.len());
        for s in &self.segments {
            if s.len == 0 || s.start + s.len > self.test_len || !s.shift.is_finite() {
                return Err(Error::validation(format!(
                    "segment at {} of length {} does not fit a test split of {}",
                    s.start, s.len, self.test_len
                )));
            }
            segs.push(Segment::new(s.start, s.start + s.len - 1));
        }
        segs.sort_by_key(|s| s.start);
        SegmentSet::new(segs)
            .map_err(|_| Error::validation("injected segments overlap"))
    }
}

/// Nominal noise of the given model, seeded.
pub fn noise_stream(len: usize, dims: usize, noise: NoiseModel, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let values = match noise {
        NoiseModel::Iid => (0..len * dims).map(|_| draw()).collect(),
        NoiseModel::Ar1 { rho } => {
            let innov = (1.0 - rho * rho).sqrt();
            let mut prev: Vec<f64> = (0..dims).map(|_| draw()).collect();
            let mut out = Vec::with_capacity(len * dims);
            for _ in 0..len {
                for p in prev.iter_mut() {
                    *p = rho * *p + innov * draw();
                }
                out.extend_from_slice(&prev);
            }
            out
        }
    };
    TimeSeries::from_flat(len, dims, values)
}

/// I.i.d. standard normal features.
pub fn iid_normal_stream(len: usize, dims: usize, seed: u64) -> Result<TimeSeries> {
    noise_stream(len, dims, NoiseModel::Iid, seed)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    let segments = spec.validate()?;
    let train = noise_stream(spec.train_len, spec.dims, spec.noise, derive_seed(spec.seed, 0))?;
    let test = noise_stream(spec.test_len, spec.dims, spec.noise, derive_seed(spec.seed, 1))?;
    let mut values = test.into_flat();
    for s in &spec.segments {
        for t in s.start..s.start + s.len {
            values[t * spec.dims..(t + 1) * spec.dims]
                .iter_mut()
                .for_each(|v| *v += s.shift);
        }
    }
    let test = TimeSeries::from_flat(spec.test_len, spec.dims, values)?;
    let labels = segments.to_labels(spec.test_len)?;
    DatasetBundle::new(
        format!("synthetic-{}", spec.seed),
        train,
        test,
        labels,
    )
}

/// `count` disjoint segments of length `len` spread evenly over the test
/// split, each centred in its own equal-width slot.
pub fn spaced_segments(test_len: usize, count: usize, len: usize, shift: f64) -> Vec<InjectedSegment> {
    if count == 0 {
        return Vec::new();
    }
    let slot = test_len / count;
    (0..count)
        .map(|i| InjectedSegment {
            start: i * slot + slot.saturating_sub(len) / 2,
            len: len.min(slot),
            shift,
        })
        .collect()
}
