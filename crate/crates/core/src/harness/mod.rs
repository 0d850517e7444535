//! Datasets, synthetic streams, experiment drivers and report output.

mod dataset;
mod experiments;
mod report;
mod synth;

pub use dataset::{
    load_dataset, read_labels, read_table, write_dataset, write_labels, write_table,
    DatasetBundle, FormatSpec, LABEL_FILE, TEST_FILE, TRAIN_FILE,
};
pub use experiments::{
    binomial_lower_bound, random_guess_curve, run_far_experiment, run_flaw_demo,
    run_spd_benchmark, spd_benchmark, default_threshold_grid, DetectorConfig, FittedDetector, SpdBenchmark,
    FAR_CONFIDENCE,
};
pub use report::{
    emit_report, read_report_csv, read_report_json, render_report, ExperimentReport, Num,
    ReportFormat, Table, SCHEMA_VERSION,
};
pub use synth::{
    generate_synthetic, iid_normal_stream, noise_stream, spaced_segments, InjectedSegment,
    NoiseModel, SyntheticSpec,
};
