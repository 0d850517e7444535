//! Instance-based scores, the point-adjust protocol, and event-level metrics
//! (average detection delay, alarm precision, and the precision/delay area).

use serde::{Deserialize, Serialize};

use crate::data::{AlarmTrack, LabelTrack, ScoreTrack, SegmentSet};
use crate::error::{Error, Result};

/// Default maximum tolerable delay, in instances.
pub const DEFAULT_DELTA_MAX: usize = 100;

/// Default number of quantile levels in the threshold sweep.
pub const DEFAULT_THRESHOLD_COUNT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl PrfResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        // the count form avoids rounding in the harmonic mean
        let f1 = ratio(2.0 * tp as f64, (2 * tp + fp + fn_) as f64);
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Harmonic mean of precision and recall, 0 when both vanish.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_lengths(pred: &LabelTrack, truth: &LabelTrack) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::validation(format!(
            "prediction length {} differs from ground truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn instance_prf(pred: &LabelTrack, truth: &LabelTrack) -> Result<PrfResult> {
    check_lengths(pred, truth)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(PrfResult::from_counts(tp, fp, fn_))
}

/// Marks every instance of a ground-truth segment as predicted once any
/// instance inside it is predicted. Predictions outside segments are kept.
pub fn point_adjust(pred: &LabelTrack, truth: &LabelTrack) -> Result<LabelTrack> {
    check_lengths(pred, truth)?;
    let mut adjusted = pred.as_slice().to_vec();
    for seg in SegmentSet::from_labels(truth).segments() {
        if adjusted[seg.start..=seg.end].iter().any(|&p| p) {
            adjusted[seg.start..=seg.end].iter_mut().for_each(|p| *p = true);
        }
    }
    Ok(LabelTrack::new(adjusted))
}

pub fn adjusted_prf(pred: &LabelTrack, truth: &LabelTrack) -> Result<PrfResult> {
    instance_prf(&point_adjust(pred, truth)?, truth)
}

/// Per-segment detection windows `[tau_i, tau_i + delta_max]`, each cut short
/// before the next segment's onset.
fn detection_windows(segments: &SegmentSet, delta_max: usize) -> Vec<(usize, usize)> {
    let starts: Vec<usize> = segments.starts().collect();
    starts
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut end = tau.saturating_add(delta_max);
            if let Some(&next) = starts.get(i + 1) {
                end = end.min(next - 1);
            }
            (tau, end)
        })
        .collect()
}

fn first_alarm_in(alarms: &[usize], lo: usize, hi: usize) -> Option<usize> {
    let idx = alarms.partition_point(|&t| t < lo);
    alarms.get(idx).copied().filter(|&t| t <= hi)
}

/// Mean over segments of the delay from onset to the first in-window alarm;
/// missed segments are charged `delta_max`.
pub fn average_detection_delay(
    alarms: &AlarmTrack,
    segments: &SegmentSet,
    delta_max: usize,
) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::UndefinedMetric(
            "average detection delay needs at least one anomalous segment".into(),
        ));
    }
    if delta_max == 0 {
        return Err(Error::validation("delta_max must be at least 1"));
    }
    let total: usize = detection_windows(segments, delta_max)
        .into_iter()
        .map(|(tau, end)| first_alarm_in(alarms.times(), tau, end).map_or(delta_max, |t| t - tau))
        .sum();
    Ok(total as f64 / segments.count() as f64)
}

/// Fraction of alarms inside some segment's detection window.
pub fn sequence_alarm_precision(
    alarms: &AlarmTrack,
    segments: &SegmentSet,
    delta_max: usize,
) -> Result<f64> {
    if alarms.is_empty() {
        return Err(Error::UndefinedMetric(
            "alarm precision needs at least one alarm".into(),
        ));
    }
    let windows = detection_windows(segments, delta_max);
    let hits = alarms
        .times()
        .iter()
        .filter(|&&t| {
            // windows are sorted and disjoint
            let idx = windows.partition_point(|&(lo, _)| lo <= t);
            idx > 0 && t <= windows[idx - 1].1
        })
        .count();
    Ok(hits as f64 / alarms.count() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdCurvePoint {
    pub nadd: f64,
    pub precision: f64,
    pub threshold: f64,
    pub alarm_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdCurve {
    pub points: Vec<SpdCurvePoint>,
    pub spd: f64,
}

/// Curve point for one alarm track, `None` when there are no alarms.
pub fn curve_point(
    alarms: &AlarmTrack,
    segments: &SegmentSet,
    delta_max: usize,
    threshold: f64,
) -> Result<Option<SpdCurvePoint>> {
    if alarms.is_empty() {
        return Ok(None);
    }
    let add = average_detection_delay(alarms, segments, delta_max)?;
    let precision = sequence_alarm_precision(alarms, segments, delta_max)?;
    Ok(Some(SpdCurvePoint {
        nadd: add / delta_max as f64,
        precision,
        threshold,
        alarm_count: alarms.count(),
    }))
}

/// Sorts by NADD and keeps the best precision among equal NADD values.
pub fn build_curve(mut points: Vec<SpdCurvePoint>) -> Result<SpdCurve> {
    if points.is_empty() {
        return Err(Error::EmptyCurve);
    }
    points.sort_by(|a, b| {
        a.nadd
            .total_cmp(&b.nadd)
            .then(b.precision.total_cmp(&a.precision))
    });
    points.dedup_by(|later, kept| later.nadd == kept.nadd);
    let spd = spd_integrate(&points)?;
    Ok(SpdCurve { points, spd })
}

pub fn spd_curve(
    scores: &ScoreTrack,
    segments: &SegmentSet,
    delta_max: usize,
    thresholds: &[f64],
) -> Result<SpdCurve> {
    if thresholds.is_empty() {
        return Err(Error::validation("threshold list is empty"));
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &h in thresholds {
        if let Some(p) = curve_point(&scores.upward_crossings(h), segments, delta_max, h)? {
            points.push(p);
        }
    }
    build_curve(points)
}

/// Trapezoidal area under precision vs NADD over `[0, 1]`, holding the first
/// and last precision constant out to the interval ends.
pub fn spd_integrate(points: &[SpdCurvePoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|p| (p.nadd, p.precision)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(&(x, _)) = sorted.iter().find(|(x, _)| !(0.0..=1.0).contains(x)) {
        return Err(Error::validation(format!("NADD value {x} outside [0, 1]")));
    }
    let (x0, y0) = sorted[0];
    if sorted.len() == 1 {
        return Ok(y0);
    }
    let (xn, yn) = sorted[sorted.len() - 1];
    let mut area = x0 * y0 + (1.0 - xn) * yn;
    for w in sorted.windows(2) {
        area += 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
    }
    Ok(area.clamp(0.0, 1.0))
}

/// Evenly spaced empirical quantiles of the scores, deduplicated and sorted.
pub fn quantile_thresholds(scores: &ScoreTrack, count: usize) -> Vec<f64> {
    let mut sorted = scores.as_slice().to_vec();
    if sorted.is_empty() || count == 0 {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut out: Vec<f64> = (0..count)
        .map(|i| {
            let q = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
            sorted[((q * (n - 1) as f64).round() as usize).min(n - 1)]
        })
        .collect();
    out.dedup();
    out
}
