//! Experiment drivers: false-alarm validation, the random-guess flaw
//! demonstration and SPD benchmarking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::dataset::DatasetBundle;
use super::report::{ExperimentReport, Table};
use super::synth::iid_normal_stream;
use crate::data::{AlarmTrack, ScoreTrack, SegmentSet, TimeSeries};
use crate::detector::{
    compute_omega0, detect, far_bound, fit_knn, statistic_track, CalibrationReport,
    KnnCalibration, KnnOptions, DEFAULT_ALPHA, DEFAULT_FAR, DEFAULT_K, DEFAULT_SPLIT_RATIO,
};
use crate::error::{Error, Result};
use crate::forecast::{fit_ar, ArModel};
use crate::metrics::{
    average_detection_delay, build_curve, curve_point,
    sequence_alarm_precision, SpdCurve, DEFAULT_THRESHOLD_COUNT,
};
use crate::randomguess::{derive_seed, expected_adjusted_pr, monte_carlo_summary, RandomGuessSpec};

/// Confidence level of the one-sided binomial check in the FAR experiment.
pub const FAR_CONFIDENCE: f64 = 0.99;

/// One-sided Clopper-Pearson lower confidence bound on a binomial count.
pub fn binomial_lower_bound(successes: usize, trials: usize, confidence: f64) -> f64 {
    if successes == 0 || trials == 0 {
        return 0.0;
    }
    let beta = Beta::new(successes as f64, (trials - successes + 1) as f64)
        .expect("positive shape parameters");
    trials as f64 * beta.inverse_cdf(1.0 - confidence)
}

/// Empirical false-alarm periods of the kNN-CUSUM detector on an i.i.d.
/// standard normal stream, next to the theoretical lower bound `e^{omega0 h}`.
pub fn run_far_experiment(
    calib: &KnnCalibration,
    h_grid: &[f64],
    stream_length: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    if h_grid.is_empty() {
        return Err(Error::validation("threshold grid is empty"));
    }
    if let Some(h) = h_grid.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(Error::validation(format!("threshold {h} must be positive")));
    }
    if stream_length == 0 {
        return Err(Error::validation("stream length must be positive"));
    }
    let omega0 = compute_omega0(calib.dims(), calib.d_alpha, calib.phi)?;
    let stream = iid_normal_stream(stream_length, calib.dims(), seed)?;
    let evidence = calib.evidence_stream(&stream)?;
    let mut table = Table::new([
        "h",
        "alarms",
        "empirical_period",
        "bound_period",
        "implied_alarms",
        "alarms_lower_bound",
        "significant_violation",
    ]);
    let mut violations = 0usize;
    for &h in h_grid {
        let count = detect(&evidence, h).count();
        let period = if count == 0 {
            f64::INFINITY
        } else {
            stream_length as f64 / count as f64
        };
        let bound = 1.0 / far_bound(h, omega0);
        let implied = stream_length as f64 * far_bound(h, omega0);
        let lower = binomial_lower_bound(count, stream_length, FAR_CONFIDENCE);
        let significant = period < bound && lower > implied;
        violations += significant as usize;
        table.push([
            h,
            count as f64,
            period,
            bound,
            implied,
            lower,
            significant as u8 as f64,
        ]);
    }
    Ok(ExperimentReport::new("far-validate", table)
        .with_config("stream_length", stream_length)
        .with_config("h_grid", h_grid)
        .with_config("confidence", FAR_CONFIDENCE)
        .with_metric("omega0", omega0)
        .with_metric("significant_violations", violations as f64)
        .with_seeds(vec![seed])
        .with_calibration(CalibrationReport::new(calib, DEFAULT_FAR)?))
}

/// Random Guess on a labelled bundle: the analytic point-adjusted scores,
/// their simulated counterparts and the instance-based F1 of the same draws.
pub fn run_flaw_demo(
    bundle: &DatasetBundle,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let spec = RandomGuessSpec::new(p, seed)?;
    let segments = SegmentSet::from_labels(&bundle.test_labels);
    if segments.is_empty() {
        return Err(Error::validation(format!(
            "dataset '{}' has no anomalous segments",
            bundle.name
        )));
    }
    let lengths = segments.lengths();
    let n_nominal = bundle.test_labels.len() - segments.total_len();
    let analytic = expected_adjusted_pr(p, &lengths, n_nominal)?;
    let mc = monte_carlo_summary(&spec, &bundle.test_labels, trials)?;
    let mut table = Table::new([
        "p",
        "analytic_precision",
        "analytic_recall",
        "analytic_f1",
        "mc_adjusted_f1",
        "mc_adjusted_f1_stderr",
        "mc_instance_f1",
        "mc_instance_f1_stderr",
    ]);
    table.push([
        p,
        analytic.precision,
        analytic.recall,
        analytic.f1,
        mc.f1.mean,
        mc.f1.stderr,
        mc.instance_f1.mean,
        mc.instance_f1.stderr,
    ]);
    Ok(ExperimentReport::new("flaw-demo", table)
        .with_config("dataset", &bundle.name)
        .with_config("p", p)
        .with_config("trials", trials)
        .with_config("segment_count", lengths.len())
        .with_config("anomalous_instances", segments.total_len())
        .with_config("nominal_instances", n_nominal)
        .with_seeds(vec![seed])
        .with_metric("analytic_precision", analytic.precision)
        .with_metric("analytic_recall", analytic.recall)
        .with_metric("analytic_f1", analytic.f1)
        .with_metric("expected_tp", analytic.expected_tp)
        .with_metric("expected_fp", analytic.expected_fp)
        .with_metric("expected_fn", analytic.expected_fn)
        .with_metric("mc_tp", mc.tp.mean)
        .with_metric("mc_tp_stderr", mc.tp.stderr)
        .with_metric("mc_fp", mc.fp.mean)
        .with_metric("mc_fp_stderr", mc.fp.stderr)
        .with_metric("mc_fn", mc.fn_.mean)
        .with_metric("mc_fn_stderr", mc.fn_.stderr)
        .with_metric("mc_adjusted_f1", mc.f1.mean)
        .with_metric("mc_adjusted_f1_stderr", mc.f1.stderr)
        .with_metric("mc_instance_f1", mc.instance_f1.mean)
        .with_metric("mc_instance_f1_stderr", mc.instance_f1.stderr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub ar_order: usize,
    pub k: usize,
    pub alpha: f64,
    pub split_ratio: f64,
    pub far_target: f64,
    pub phi_multiplier: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            ar_order: 5,
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            split_ratio: DEFAULT_SPLIT_RATIO,
            far_target: DEFAULT_FAR,
            phi_multiplier: 1.0,
            seed: 0,
        }
    }
}

/// A forecaster and a kNN calibration fitted on the same nominal split.
#[derive(Debug, Clone)]
pub struct FittedDetector {
    pub forecaster: ArModel,
    pub calibration: KnnCalibration,
    pub report: CalibrationReport,
}

impl FittedDetector {
    /// Fits the AR forecaster on `train` and calibrates the kNN baseline on
    /// its residuals, skipping the warm-up rows that have no prediction.
    pub fn fit(train: &TimeSeries, config: &DetectorConfig) -> Result<Self> {
        let forecaster = fit_ar(train, config.ar_order)?;
        let res = forecaster.residuals(train)?;
        let res = res.slice_rows(config.ar_order, res.len())?;
        let opts = KnnOptions {
            k: config.k,
            alpha: config.alpha,
            phi_multiplier: config.phi_multiplier,
        };
        let calibration = fit_knn(&res, config.split_ratio, opts, config.seed)?;
        let report = CalibrationReport::new(&calibration, config.far_target)?;
        Ok(Self {
            forecaster,
            calibration,
            report,
        })
    }

    /// Per-step evidence on a test series; the AR warm-up rows carry zero
    /// residuals.
    pub fn evidence(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let res = self.forecaster.residuals(series)?;
        self.calibration.evidence_stream(&res)
    }

    /// CUSUM statistic without resets.
    pub fn statistic(&self, series: &TimeSeries) -> Result<ScoreTrack> {
        ScoreTrack::new(statistic_track(&self.evidence(series)?))
    }

    /// Alarms at the calibrated threshold.
    pub fn alarms(&self, series: &TimeSeries) -> Result<AlarmTrack> {
        Ok(detect(&self.evidence(series)?, self.report.h))
    }
}

/// `count` log-spaced thresholds from `h / 100` up to the largest value the
/// reset-free statistic reaches, which no alarm threshold can usefully exceed.
/// The calibrated `h` is always included.
pub fn default_threshold_grid(evidence: &[f64], h: f64, count: usize) -> Vec<f64> {
    let top = statistic_track(evidence)
        .into_iter()
        .fold(0.0f64, f64::max);
    let lo = h / 100.0;
    let mut grid = vec![h];
    if top > lo && count > 1 {
        let ratio = (top / lo).ln() / (count - 1) as f64;
        grid.extend((0..count).map(|i| lo * (ratio * i as f64).exp()));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// SPD of `n` uniformly placed distinct alarms for each requested count `n`.
pub fn random_guess_curve(
    len: usize,
    segments: &SegmentSet,
    delta_max: usize,
    alarm_counts: &[usize],
    seed: u64,
) -> Result<SpdCurve> {
    let mut points = Vec::with_capacity(alarm_counts.len());
    for (i, &n) in alarm_counts.iter().enumerate() {
        if n > len {
            return Err(Error::validation(format!(
                "cannot place {n} alarms in {len} steps"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let mut times = sample(&mut rng, len, n).into_vec();
        times.sort_unstable();
        let alarms = AlarmTrack::new(times)?;
        if let Some(p) = curve_point(&alarms, segments, delta_max, n as f64)? {
            points.push(p);
        }
    }
    build_curve(points)
}

/// Outcome of one benchmark run, before it is turned into a report.
#[derive(Debug, Clone)]
pub struct SpdBenchmark {
    pub curve: SpdCurve,
    pub random_guess: SpdCurve,
    pub calibration: CalibrationReport,
    pub alarms_at_h: usize,
    pub add_at_h: f64,
    pub precision_at_h: Option<f64>,
}

pub fn spd_benchmark(
    bundle: &DatasetBundle,
    config: &DetectorConfig,
    delta_max: usize,
    thresholds: Option<&[f64]>,
) -> Result<SpdBenchmark> {
    let segments = SegmentSet::from_labels(&bundle.test_labels);
    let detector = FittedDetector::fit(&bundle.train, config)?;
    let evidence = detector.evidence(&bundle.test)?;
    let grid = match thresholds {
        Some([]) => return Err(Error::validation("threshold list is empty")),
        Some(t) => t.to_vec(),
        None => default_threshold_grid(&evidence, detector.report.h, DEFAULT_THRESHOLD_COUNT),
    };
    let mut points = Vec::with_capacity(grid.len());
    for &h in &grid {
        if let Some(p) = curve_point(&detect(&evidence, h), &segments, delta_max, h)? {
            points.push(p);
        }
    }
    let curve = build_curve(points)?;
    let counts: Vec<usize> = curve.points.iter().map(|p| p.alarm_count).collect();
    let random_guess = random_guess_curve(
        bundle.test.len(),
        &segments,
        delta_max,
        &counts,
        derive_seed(config.seed, 1),
    )?;
    let alarms = detect(&evidence, detector.report.h);
    let add_at_h = average_detection_delay(&alarms, &segments, delta_max)?;
    let precision_at_h = if alarms.is_empty() {
        None
    } else {
        Some(sequence_alarm_precision(&alarms, &segments, delta_max)?)
    };
    Ok(SpdBenchmark {
        curve,
        random_guess,
        calibration: detector.report,
        alarms_at_h: alarms.count(),
        add_at_h,
        precision_at_h,
    })
}

/// SPD benchmark as a report; the table holds the detector's curve, one point
/// per threshold at which the resetting detector raised alarms.
pub fn run_spd_benchmark(
    bundle: &DatasetBundle,
    config: &DetectorConfig,
    delta_max: usize,
    thresholds: Option<&[f64]>,
) -> Result<ExperimentReport> {
    let b = spd_benchmark(bundle, config, delta_max, thresholds)?;
    let mut table = Table::new(["threshold", "nadd", "precision", "alarm_count"]);
    for p in &b.curve.points {
        table.push([p.threshold, p.nadd, p.precision, p.alarm_count as f64]);
    }
    Ok(ExperimentReport::new("spd-bench", table)
        .with_config("dataset", &bundle.name)
        .with_config("detector", config)
        .with_config("delta_max", delta_max)
        .with_config(
            "thresholds",
            thresholds.map_or("log-spaced".to_string(), |t| format!("{} explicit", t.len())),
        )
        .with_seeds(vec![config.seed])
        .with_metric("spd", b.curve.spd)
        .with_metric("random_guess_spd", b.random_guess.spd)
        .with_metric("alarms_at_h", b.alarms_at_h as f64)
        .with_metric("add_at_h", b.add_at_h)
        .with_metric("precision_at_h", b.precision_at_h.unwrap_or(f64::NAN))
        .with_calibration(b.calibration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelTrack;
    use crate::harness::synth::{generate_synthetic, spaced_segments, NoiseModel, SyntheticSpec};

    fn calib(seed: u64) -> KnnCalibration {
        let nominal = iid_normal_stream(2000, 2, seed).unwrap();
        fit_knn(&nominal, 0.5, KnnOptions::default(), seed).unwrap()
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(matches!(
            run_far_experiment(&calib(1), &[], 100, 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn huge_threshold_never_alarms() {
        let r = run_far_experiment(&calib(1), &[1e9], 5000, 3).unwrap();
        assert_eq!(r.table.column("alarms").unwrap(), vec![0.0]);
        assert_eq!(r.table.column("empirical_period").unwrap(), vec![f64::INFINITY]);
        assert_eq!(r.table.column("significant_violation").unwrap(), vec![0.0]);
    }

    #[test]
    fn tiny_threshold_alarms_often() {
        let r = run_far_experiment(&calib(1), &[1e-9, 1.0], 5000, 3).unwrap();
        let periods = r.table.column("empirical_period").unwrap();
        assert!(periods[0] < 30.0, "{periods:?}");
        assert!(periods[0] <= periods[1]);
    }

    #[test]
    fn clopper_pearson_lower_bound() {
        assert_eq!(binomial_lower_bound(0, 100, 0.99), 0.0);
        // all successes: lower bound is n (1 - confidence)^{1/n}
        let lb = binomial_lower_bound(10, 10, 0.99);
        assert!((lb - 10.0 * 0.01f64.powf(0.1)).abs() < 1e-8, "{lb}");
        let lb = binomial_lower_bound(50, 1000, 0.99);
        assert!(lb < 50.0 && lb > 30.0);
    }

    #[test]
    fn flaw_demo_requires_segments() {
        let bundle = DatasetBundle::new(
            "flat",
            TimeSeries::from_column(&[0.0; 10]).unwrap(),
            TimeSeries::from_column(&[0.0; 10]).unwrap(),
            LabelTrack::zeros(10),
        )
        .unwrap();
        assert!(matches!(
            run_flaw_demo(&bundle, 0.01, 10, 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn flaw_demo_long_segments_full_recall() {
        let mut labels = vec![false; 20_000];
        labels.extend(vec![true; 1000]);
        labels.extend(vec![false; 27_000]);
        labels.extend(vec![true; 2000]);
        let n = labels.len();
        let bundle = DatasetBundle::new(
            "long",
            TimeSeries::from_column(&[0.0; 10]).unwrap(),
            TimeSeries::from_column(&vec![0.0; n]).unwrap(),
            LabelTrack::new(labels),
        )
        .unwrap();
        let r = run_flaw_demo(&bundle, 0.01, 20, 7).unwrap();
        assert!(1.0 - r.metric("analytic_recall").unwrap() < 5e-5);
        assert!(r.metric("mc_instance_f1").unwrap() < r.metric("mc_adjusted_f1").unwrap());
    }

    #[test]
    fn random_guess_curve_counts() {
        let segs = SegmentSet::from_labels(&LabelTrack::new(
            (0..500).map(|t| (200..250).contains(&t)).collect(),
        ));
        let c = random_guess_curve(500, &segs, 50, &[1, 10, 100, 500], 4).unwrap();
        assert!(c.points.len() <= 4);
        assert!(c
            .points
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.nadd) && (0.0..=1.0).contains(&p.precision)));
        assert!((0.0..=1.0).contains(&c.spd));
        assert!(random_guess_curve(10, &segs, 5, &[11], 0).is_err());
    }

    #[test]
    fn benchmark_is_deterministic_and_beats_chance() {
        let spec = SyntheticSpec {
            train_len: 3000,
            test_len: 4000,
            dims: 2,
            noise: NoiseModel::Iid,
            segments: spaced_segments(4000, 5, 60, 4.0),
            seed: 11,
        };
        let bundle = generate_synthetic(&spec).unwrap();
        let config = DetectorConfig {
            seed: 11,
            ..Default::default()
        };
        let a = run_spd_benchmark(&bundle, &config, 100, None).unwrap();
        let b = run_spd_benchmark(&bundle, &config, 100, None).unwrap();
        assert_eq!(a, b);
        assert!(a.metric("spd").unwrap() > a.metric("random_guess_spd").unwrap());
    }
}
