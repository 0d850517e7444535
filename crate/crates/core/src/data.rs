//! Time series, label, segment, alarm and score containers.
//!
//! Time is a 0-based instance index. Segments are inclusive intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `T x d` matrix of finite observations stored row-major (one row per instance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    len: usize,
    dims: usize,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn from_flat(len: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if len == 0 || dims == 0 {
            return Err(Error::validation(format!(
                "time series must have at least one row and one column, got {len}x{dims}"
            )));
        }
        if values.len() != len * dims {
            return Err(Error::validation(format!(
                "expected {} values for a {len}x{dims} series, got {}",
                len * dims,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite value at row {}, column {}",
                pos / dims,
                pos % dims
            )));
        }
        Ok(Self { len, dims, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::validation(format!(
                    "row {i} has {} columns, expected {dims}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), dims, values)
    }

    /// Single-column series.
    pub fn from_column(column: &[f64]) -> Result<Self> {
        Self::from_flat(column.len(), 1, column.to_vec())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    /// Rows `start..end` as a new series.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len {
            return Err(Error::Range(format!(
                "row range {start}..{end} invalid for series of length {}",
                self.len
            )));
        }
        Self::from_flat(
            end - start,
            self.dims,
            self.values[start * self.dims..end * self.dims].to_vec(),
        )
    }
}

/// Per-instance binary ground truth or predictions, `true` = anomalous.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelTrack(Vec<bool>);

impl LabelTrack {
    pub fn new(labels: Vec<bool>) -> Self {
        Self(labels)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    /// Builds a track from 0/1 integers; any other value is rejected.
    pub fn from_binary(values: &[u8]) -> Result<Self> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::validation(format!(
                    "label at index {i} is {other}, expected 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }
}

impl From<Vec<bool>> for LabelTrack {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

/// Inclusive anomalous interval `[start, end]`.
#[allow(clippy::len_without_is_empty)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Sorted, disjoint anomalous segments.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentSet {
    segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if s.start > s.end {
                return Err(Error::validation(format!(
                    "segment {i} has start {} after end {}",
                    s.start, s.end
                )));
            }
            if i > 0 && segments[i - 1].end >= s.start {
                return Err(Error::validation(format!(
                    "segment {i} overlaps or precedes segment {}",
                    i - 1
                )));
            }
        }
        Ok(Self { segments })
    }

    /// Maximal runs of consecutive positives.
    pub fn from_labels(labels: &LabelTrack) -> Self {
        let mut segments = Vec::new();
        let mut open: Option<usize> = None;
        for (t, &l) in labels.as_slice().iter().enumerate() {
            match (l, open) {
                (true, None) => open = Some(t),
                (false, Some(s)) => {
                    segments.push(Segment::new(s, t - 1));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(s) = open {
            segments.push(Segment::new(s, labels.len() - 1));
        }
        Self { segments }
    }

    pub fn to_labels(&self, len: usize) -> Result<LabelTrack> {
        let mut labels = vec![false; len];
        for s in &self.segments {
            if s.end >= len {
                return Err(Error::Range(format!(
                    "segment ({}, {}) exceeds track length {len}",
                    s.start, s.end
                )));
            }
            labels[s.start..=s.end].iter_mut().for_each(|l| *l = true);
        }
        Ok(LabelTrack(labels))
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Number of segments `S`.
    pub fn count(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Segment lengths `M_i`.
    pub fn lengths(&self) -> Vec<usize> {
        self.segments.iter().map(Segment::len).collect()
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().map(|s| s.start)
    }
}

pub fn segments_from_labels(labels: &LabelTrack) -> SegmentSet {
    SegmentSet::from_labels(labels)
}

pub fn labels_from_segments(segments: &SegmentSet, len: usize) -> Result<LabelTrack> {
    segments.to_labels(len)
}

/// Strictly increasing alarm times.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlarmTrack(Vec<usize>);

impl AlarmTrack {
    pub fn new(times: Vec<usize>) -> Result<Self> {
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "alarm times must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self(times))
    }

    pub(crate) fn from_sorted_unchecked(times: Vec<usize>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self(times)
    }

    /// Alarm at the first instance of every positive run.
    pub fn from_predictions(pred: &LabelTrack) -> Self {
        Self(SegmentSet::from_labels(pred).starts().collect())
    }

    pub fn times(&self) -> &[usize] {
        &self.0
    }

    /// Number of alarms `Ŝ`.
    pub fn count(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-instance anomaly statistic.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTrack(Vec<f64>);

impl ScoreTrack {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::validation(format!("non-finite score at index {i}")));
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Alarm at every upward crossing of `h`: `s_t >= h` with `s_{t-1} < h`,
    /// plus `t = 0` when `s_0 >= h`.
    pub fn upward_crossings(&self, h: f64) -> AlarmTrack {
        let mut above = false;
        let times = self
            .0
            .iter()
            .enumerate()
            .filter_map(|(t, &s)| {
                let now = s >= h;
                let fire = now && !above;
                above = now;
                fire.then_some(t)
            })
            .collect();
        AlarmTrack(times)
    }
}

/// Per-column min-max statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(series: &TimeSeries) -> Self {
        let d = series.dims();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for row in series.rows() {
            for j in 0..d {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        Self { mins, ranges }
    }

    /// Applies `(x - min) / (max - min)`. Columns that were constant on the
    /// fitted data are only shifted, so they map to 0 there.
    pub fn transform(&self, series: &TimeSeries) -> Result<TimeSeries> {
        if series.dims() != self.mins.len() {
            return Err(Error::validation(format!(
                "scaler fitted on {} columns, series has {}",
                self.mins.len(),
                series.dims()
            )));
        }
        let d = series.dims();
        let values = series
            .as_flat()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let j = i % d;
                let shifted = x - self.mins[j];
                if self.ranges[j] > 0.0 {
                    shifted / self.ranges[j]
                } else {
                    shifted
                }
            })
            .collect();
        TimeSeries::from_flat(series.len(), d, values)
    }
}

pub fn minmax_normalize(series: &TimeSeries) -> Result<TimeSeries> {
    MinMaxScaler::fit(series).transform(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(v: &[u8]) -> LabelTrack {
        LabelTrack::from_binary(v).unwrap()
    }

    #[test]
    fn single_run() {
        let s = segments_from_labels(&track(&[0, 0, 1, 1, 1, 0]));
        assert_eq!(s.segments(), &[Segment::new(2, 4)]);
        assert_eq!(s.count(), 1);
        assert_eq!(s.lengths(), vec![3]);
    }

    #[test]
    fn no_runs() {
        let s = segments_from_labels(&track(&[0, 0, 0]));
        assert!(s.is_empty());
        assert_eq!(labels_from_segments(&s, 3).unwrap(), track(&[0, 0, 0]));
    }

    #[test]
    fn two_runs_including_boundaries() {
        let s = segments_from_labels(&track(&[1, 0, 1, 1]));
        assert_eq!(s.segments(), &[Segment::new(0, 0), Segment::new(2, 3)]);
        assert_eq!(s.lengths(), vec![1, 2]);
        assert_eq!(labels_from_segments(&s, 4).unwrap(), track(&[1, 0, 1, 1]));
    }

    #[test]
    fn labels_from_segments_inverse() {
        let s = SegmentSet::new(vec![Segment::new(2, 4)]).unwrap();
        assert_eq!(labels_from_segments(&s, 6).unwrap(), track(&[0, 0, 1, 1, 1, 0]));
    }

    #[test]
    fn out_of_range_segment() {
        let s = SegmentSet::new(vec![Segment::new(2, 6)]).unwrap();
        assert!(matches!(labels_from_segments(&s, 6), Err(Error::Range(_))));
    }

    #[test]
    fn overlapping_segments_rejected() {
        assert!(SegmentSet::new(vec![Segment::new(0, 3), Segment::new(3, 5)]).is_err());
        assert!(SegmentSet::new(vec![Segment::new(4, 3)]).is_err());
    }

    #[test]
    fn non_binary_labels_rejected() {
        assert!(LabelTrack::from_binary(&[0, 2]).is_err());
    }

    #[test]
    fn normalize_affine() {
        let s = TimeSeries::from_column(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(minmax_normalize(&s).unwrap().as_flat(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_column() {
        let s = TimeSeries::from_column(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(minmax_normalize(&s).unwrap().as_flat(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_columns_independently() {
        let s = TimeSeries::from_rows(&[[0.0, 10.0], [1.0, 20.0]]).unwrap();
        assert_eq!(minmax_normalize(&s).unwrap().as_flat(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(TimeSeries::from_column(&[1.0, f64::NAN]).is_err());
        assert!(ScoreTrack::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn test_split_uses_train_statistics() {
        let train = TimeSeries::from_column(&[0.0, 10.0]).unwrap();
        let test = TimeSeries::from_column(&[5.0, 20.0]).unwrap();
        let scaler = MinMaxScaler::fit(&train);
        assert_eq!(scaler.transform(&test).unwrap().as_flat(), &[0.5, 2.0]);
    }

    #[test]
    fn crossings() {
        let s = ScoreTrack::new(vec![1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 3.0]).unwrap();
        assert_eq!(s.upward_crossings(0.5).times(), &[0, 3, 6]);
        assert!(s.upward_crossings(5.0).is_empty());
    }

    #[test]
    fn alarms_strictly_increasing() {
        assert!(AlarmTrack::new(vec![1, 1]).is_err());
        assert!(AlarmTrack::new(vec![3, 1]).is_err());
        assert_eq!(AlarmTrack::new(vec![1, 4]).unwrap().count(), 2);
    }
}
