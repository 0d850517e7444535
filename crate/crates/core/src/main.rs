use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use seqdetect::data::{AlarmTrack, ScoreTrack, SegmentSet};
use seqdetect::detector::{
    calibrate_threshold, compute_omega0, fit_knn, KnnOptions, DEFAULT_ALPHA, DEFAULT_FAR,
    DEFAULT_K, DEFAULT_SPLIT_RATIO,
};
use seqdetect::harness::{
    generate_synthetic, iid_normal_stream, load_dataset, read_labels, read_table, render_report,
    run_far_experiment, run_flaw_demo, run_spd_benchmark, spaced_segments, write_dataset,
    DatasetBundle, DetectorConfig, ExperimentReport, FittedDetector, FormatSpec, NoiseModel,
    ReportFormat, SyntheticSpec, Table,
};
use seqdetect::metrics::{
    adjusted_prf, average_detection_delay, instance_prf, quantile_thresholds,
    sequence_alarm_precision, spd_curve, DEFAULT_DELTA_MAX, DEFAULT_THRESHOLD_COUNT,
};
use seqdetect::{Error, Result};

#[derive(Parser)]
#[command(name = "seqdetect", version, about = "Sequence-aware anomaly detection metrics and a calibrated kNN-CUSUM detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions or a score track against labels
    Eval(EvalArgs),
    /// Random Guess scored with and without point adjustment
    FlawDemo(FlawArgs),
    /// Fit the forecaster and kNN baseline on a training split
    Calibrate(DetectArgs),
    /// Run the calibrated detector over a test split
    Detect(DetectArgs),
    /// Compare empirical false-alarm periods with the theoretical bound
    FarValidate(FarArgs),
    /// SPD of the detector against Random Guess at matched alarm counts
    SpdBench(BenchArgs),
    /// Write a synthetic mean-shift dataset
    Synth(SynthArgs),
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// json or csv
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: ReportFormat,
    /// Destination file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record elapsed wall-clock time in the report
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding train.csv, test.csv and test_label.csv
    #[arg(long)]
    data: Option<PathBuf>,
    /// Data files have no header row
    #[arg(long)]
    no_header: bool,
    /// Leading columns to ignore, such as a timestamp
    #[arg(long, default_value_t = 0)]
    skip_columns: usize,
    /// Skip min-max scaling with training statistics
    #[arg(long)]
    no_normalize: bool,
    #[command(flatten)]
    synth: SynthShape,
}

#[derive(Args)]
struct SynthShape {
    #[arg(long, default_value_t = 5000)]
    train_len: usize,
    #[arg(long, default_value_t = 10_000)]
    test_len: usize,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, default_value_t = 5)]
    segments: usize,
    #[arg(long, default_value_t = 100)]
    segment_len: usize,
    #[arg(long, default_value_t = 3.0)]
    shift: f64,
    /// AR(1) noise coefficient; i.i.d. noise when zero
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Target false-alarm rate
    #[arg(long, default_value_t = DEFAULT_FAR)]
    far: f64,
    #[arg(long, default_value_t = 5)]
    ar_order: usize,
    #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
    split_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    phi_multiplier: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Binary prediction file, one 0/1 per row
    #[arg(long, conflicts_with = "scores")]
    pred: Option<PathBuf>,
    /// Real-valued score file, one value per row
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Ground-truth label file
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA_MAX)]
    delta_max: usize,
    /// Comma-separated thresholds for score files; quantiles when absent
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    no_header: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct FlawArgs {
    #[arg(long, default_value_t = 0.01)]
    p: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, default_value_t = DEFAULT_DELTA_MAX)]
    delta_max: usize,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct FarArgs {
    /// Feature dimension of the nominal stream
    #[arg(long, default_value_t = 2)]
    dims: usize,
    /// Nominal points used for calibration
    #[arg(long, default_value_t = 10_000)]
    nominal: usize,
    #[arg(long, default_value_t = 1_000_000)]
    stream_length: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Comma-separated CUSUM thresholds; by default ten thresholds
    /// calibrated for rates from 1e-1 down to 1e-5
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Option<Vec<f64>>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, default_value_t = DEFAULT_DELTA_MAX)]
    delta_max: usize,
    /// Comma-separated CUSUM thresholds; log-spaced when absent
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Option<Vec<f64>>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    shape: SynthShape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Eval(a) => timed(&a.output, || eval(&a)),
        Command::FlawDemo(a) => timed(&a.output, || {
            let bundle = bundle(&a.data, a.output.seed)?;
            run_flaw_demo(&bundle, a.p, a.trials, a.output.seed)
        }),
        Command::Calibrate(a) => timed(&a.output, || calibrate(&a)),
        Command::Detect(a) => timed(&a.output, || detect_cmd(&a)),
        Command::FarValidate(a) => timed(&a.output, || far_validate(&a)),
        Command::SpdBench(a) => timed(&a.output, || {
            let bundle = bundle(&a.data, a.output.seed)?;
            let config = detector_config(&a.detector, a.output.seed);
            run_spd_benchmark(&bundle, &config, a.delta_max, a.thresholds.as_deref())
        }),
        Command::Synth(a) => {
            let b = generate_synthetic(&synth_spec(&a.shape, a.seed))?;
            for path in write_dataset(&a.out, &b)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn timed(output: &Output, f: impl FnOnce() -> Result<ExperimentReport>) -> Result<()> {
    let start = Instant::now();
    let mut report = f()?;
    if output.timing {
        report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    let body = render_report(&report, output.format)?;
    match &output.out {
        Some(path) => std::fs::write(path, body).map_err(|e| io_error(path, e)),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn synth_spec(shape: &SynthShape, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        train_len: shape.train_len,
        test_len: shape.test_len,
        dims: shape.dims,
        noise: if shape.rho == 0.0 {
            NoiseModel::Iid
        } else {
            NoiseModel::Ar1 { rho: shape.rho }
        },
        segments: spaced_segments(shape.test_len, shape.segments, shape.segment_len, shape.shift),
        seed,
    }
}

fn bundle(args: &DataArgs, seed: u64) -> Result<DatasetBundle> {
    match &args.data {
        Some(dir) => {
            let format = FormatSpec {
                header: !args.no_header,
                skip_columns: args.skip_columns,
                normalize: !args.no_normalize,
                ..Default::default()
            };
            load_dataset(dir, &format)
        }
        None => generate_synthetic(&synth_spec(&args.synth, seed)),
    }
}

fn detector_config(args: &DetectorArgs, seed: u64) -> DetectorConfig {
    DetectorConfig {
        ar_order: args.ar_order,
        k: args.k,
        alpha: args.alpha,
        split_ratio: args.split_ratio,
        far_target: args.far,
        phi_multiplier: args.phi_multiplier,
        seed,
    }
}

fn eval(a: &EvalArgs) -> Result<ExperimentReport> {
    let format = FormatSpec {
        header: !a.no_header,
        ..Default::default()
    };
    let truth = read_labels(&a.labels, &format)?;
    let segments = SegmentSet::from_labels(&truth);
    let report = match (&a.pred, &a.scores) {
        (Some(path), _) => {
            let pred = read_labels(path, &format)?;
            let inst = instance_prf(&pred, &truth)?;
            let adj = adjusted_prf(&pred, &truth)?;
            let alarms = AlarmTrack::from_predictions(&pred);
            let mut table = Table::new(["alarm_time"]);
            for &t in alarms.times() {
                table.push([t as f64]);
            }
            let mut r = ExperimentReport::new("eval", table)
                .with_metric("instance_precision", inst.precision)
                .with_metric("instance_recall", inst.recall)
                .with_metric("instance_f1", inst.f1)
                .with_metric("adjusted_precision", adj.precision)
                .with_metric("adjusted_recall", adj.recall)
                .with_metric("adjusted_f1", adj.f1)
                .with_metric("alarms", alarms.count() as f64);
            if !segments.is_empty() {
                r = r.with_metric(
                    "add",
                    average_detection_delay(&alarms, &segments, a.delta_max)?,
                );
            }
            if !alarms.is_empty() {
                r = r.with_metric(
                    "sequence_precision",
                    sequence_alarm_precision(&alarms, &segments, a.delta_max)?,
                );
            }
            r
        }
        (None, Some(path)) => {
            let series = read_table(path, &format)?;
            if series.dims() != 1 {
                return Err(invalid(format!(
                    "score file must have one column, found {}",
                    series.dims()
                )));
            }
            if series.len() != truth.len() {
                return Err(invalid(format!(
                    "{} scores but {} labels",
                    series.len(),
                    truth.len()
                )));
            }
            let scores = ScoreTrack::new(series.into_flat())?;
            let grid = match &a.thresholds {
                Some(t) => t.clone(),
                None => quantile_thresholds(&scores, DEFAULT_THRESHOLD_COUNT),
            };
            let curve = spd_curve(&scores, &segments, a.delta_max, &grid)?;
            let mut table = Table::new(["threshold", "nadd", "precision", "alarm_count"]);
            for p in &curve.points {
                table.push([p.threshold, p.nadd, p.precision, p.alarm_count as f64]);
            }
            ExperimentReport::new("eval", table).with_metric("spd", curve.spd)
        }
        (None, None) => return Err(invalid("either --pred or --scores is required")),
    };
    Ok(report.with_config("delta_max", a.delta_max))
}

fn calibrate(a: &DetectArgs) -> Result<ExperimentReport> {
    let bundle = bundle(&a.data, a.output.seed)?;
    let config = detector_config(&a.detector, a.output.seed);
    let fitted = FittedDetector::fit(&bundle.train, &config)?;
    let mut table = Table::new(["dimension", "intercept", "residual_variance"]);
    for (j, (c, v)) in fitted
        .forecaster
        .intercepts()
        .iter()
        .zip(fitted.forecaster.residual_variance())
        .enumerate()
    {
        table.push([j as f64, *c, *v]);
    }
    Ok(ExperimentReport::new("calibrate", table)
        .with_config("dataset", &bundle.name)
        .with_config("detector", config)
        .with_seeds(vec![config.seed])
        .with_metric("h", fitted.report.h)
        .with_metric("omega0", fitted.report.omega0)
        .with_calibration(fitted.report))
}

fn detect_cmd(a: &DetectArgs) -> Result<ExperimentReport> {
    let bundle = bundle(&a.data, a.output.seed)?;
    let config = detector_config(&a.detector, a.output.seed);
    let fitted = FittedDetector::fit(&bundle.train, &config)?;
    let alarms = fitted.alarms(&bundle.test)?;
    let segments = SegmentSet::from_labels(&bundle.test_labels);
    let mut table = Table::new(["alarm_time"]);
    for &t in alarms.times() {
        table.push([t as f64]);
    }
    let mut r = ExperimentReport::new("detect", table)
        .with_config("dataset", &bundle.name)
        .with_config("detector", config)
        .with_config("delta_max", a.delta_max)
        .with_seeds(vec![config.seed])
        .with_metric("alarms", alarms.count() as f64)
        .with_metric("h", fitted.report.h);
    if !segments.is_empty() {
        r = r.with_metric("add", average_detection_delay(&alarms, &segments, a.delta_max)?);
        if !alarms.is_empty() {
            r = r.with_metric(
                "sequence_precision",
                sequence_alarm_precision(&alarms, &segments, a.delta_max)?,
            );
        }
    }
    Ok(r.with_calibration(fitted.report))
}

fn far_validate(a: &FarArgs) -> Result<ExperimentReport> {
    let nominal = iid_normal_stream(a.nominal, a.dims, a.output.seed)?;
    let opts = KnnOptions {
        k: a.k,
        alpha: a.alpha,
        ..Default::default()
    };
    let calib = fit_knn(&nominal, DEFAULT_SPLIT_RATIO, opts, a.output.seed)?;
    let grid = match &a.thresholds {
        Some(t) => t.clone(),
        None => {
            let omega0 = compute_omega0(calib.dims(), calib.d_alpha, calib.phi)?;
            (0..10)
                .map(|i| calibrate_threshold(10f64.powf(-1.0 - 4.0 * i as f64 / 9.0), omega0))
                .collect::<Result<_>>()?
        }
    };
    let stream_seed = seqdetect::randomguess::derive_seed(a.output.seed, 1);
    Ok(run_far_experiment(&calib, &grid, a.stream_length, stream_seed)?
        .with_config("nominal", a.nominal)
        .with_config("dims", a.dims)
        .with_config("k", a.k)
        .with_config("alpha", a.alpha)
        .with_seeds(vec![a.output.seed, stream_seed]))
}
