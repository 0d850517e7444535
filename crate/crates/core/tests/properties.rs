use nalgebra::DMatrix;
use proptest::prelude::*;

use seqdetect::data::{AlarmTrack, LabelTrack, ScoreTrack, SegmentSet, TimeSeries};
use seqdetect::detector::{detect, knn_distances, statistic_track};
use seqdetect::forecast::{
    attention_weights, distill_layer, full_attention, probsparse_attention, sparsity_measure,
    AttentionInput, DistillLayer, EncoderLayerState,
};
use seqdetect::metrics::{
    adjusted_prf, average_detection_delay, instance_prf, point_adjust, quantile_thresholds,
    sequence_alarm_precision, spd_curve,
};
use seqdetect::randomguess::expected_adjusted_pr;
use seqdetect::Error;

fn labels(max_len: usize) -> impl Strategy<Value = LabelTrack> {
    prop::collection::vec(any::<bool>(), 1..max_len).prop_map(LabelTrack::new)
}

fn pair(max_len: usize) -> impl Strategy<Value = (LabelTrack, LabelTrack)> {
    (1..max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n).prop_map(LabelTrack::new),
            prop::collection::vec(any::<bool>(), n).prop_map(LabelTrack::new),
        )
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn attention_input() -> impl Strategy<Value = AttentionInput> {
    (1usize..=32, 1usize..=32, 1usize..=16, 1usize..=16).prop_flat_map(|(lq, lk, d, dv)| {
        (matrix(lq, d), matrix(lk, d), matrix(lk, dv))
            .prop_map(|(q, k, v)| AttentionInput::new(q, k, v).unwrap())
    })
}

proptest! {
    #[test]
    fn segments_round_trip(l in labels(200)) {
        let segs = SegmentSet::from_labels(&l);
        prop_assert_eq!(segs.to_labels(l.len()).unwrap(), l.clone());
        prop_assert_eq!(segs.total_len(), l.positives());
    }

    #[test]
    fn adjustment_never_hurts((pred, truth) in pair(200)) {
        let inst = instance_prf(&pred, &truth).unwrap();
        let adj = adjusted_prf(&pred, &truth).unwrap();
        prop_assert!(adj.f1 >= inst.f1);
        prop_assert!(adj.recall >= inst.recall);
        prop_assert_eq!(adj.fp, inst.fp);
    }

    #[test]
    fn point_adjust_is_idempotent_and_extensive((pred, truth) in pair(200)) {
        let once = point_adjust(&pred, &truth).unwrap();
        prop_assert_eq!(point_adjust(&once, &truth).unwrap(), once.clone());
        for (p, a) in pred.as_slice().iter().zip(once.as_slice()) {
            prop_assert!(!p | a);
        }
    }

    #[test]
    fn delay_and_precision_bounded((pred, truth) in pair(300), delta in 1usize..60) {
        let segs = SegmentSet::from_labels(&truth);
        let alarms = AlarmTrack::from_predictions(&pred);
        match average_detection_delay(&alarms, &segs, delta) {
            Ok(add) => prop_assert!((0.0..=delta as f64).contains(&add)),
            Err(e) => prop_assert!(matches!(e, Error::UndefinedMetric(_)) && segs.is_empty()),
        }
        match sequence_alarm_precision(&alarms, &segs, delta) {
            Ok(p) => prop_assert!((0.0..=1.0).contains(&p)),
            Err(e) => prop_assert!(matches!(e, Error::UndefinedMetric(_)) && alarms.is_empty()),
        }
    }

    #[test]
    fn spd_in_unit_interval(
        (scores, truth) in (10usize..300).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(any::<bool>(), n).prop_map(LabelTrack::new),
        )),
        delta in 1usize..50,
    ) {
        let segs = SegmentSet::from_labels(&truth);
        prop_assume!(!segs.is_empty());
        let scores = ScoreTrack::new(scores).unwrap();
        let grid = quantile_thresholds(&scores, 20);
        match spd_curve(&scores, &segs, delta, &grid) {
            Ok(c) => {
                prop_assert!((0.0..=1.0).contains(&c.spd));
                for w in c.points.windows(2) {
                    prop_assert!(w[0].nadd < w[1].nadd);
                }
            }
            Err(e) => prop_assert!(matches!(e, Error::EmptyCurve)),
        }
    }

    #[test]
    fn random_guess_recall_dominates_p(
        p in 0.0f64..=1.0,
        lengths in prop::collection::vec(1usize..500, 1..6),
        n in 0usize..10_000,
    ) {
        let r = expected_adjusted_pr(p, &lengths, n).unwrap();
        prop_assert!(r.recall >= p - 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.precision));
    }

    #[test]
    fn attention_rows_are_distributions(input in attention_input()) {
        let w = attention_weights(&input).unwrap();
        for i in 0..w.nrows() {
            let s: f64 = w.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12, "row {} sums to {}", i, s);
            prop_assert!(w.row(i).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn full_budget_probsparse_is_full_attention(input in attention_input()) {
        let full = full_attention(&input).unwrap();
        let sparse = probsparse_attention(&input, input.queries.nrows()).unwrap();
        prop_assert!((full - sparse).abs().max() <= 1e-9);
    }

    #[test]
    fn sparsity_measure_lower_bound(input in attention_input()) {
        let lk = input.keys.nrows() as f64;
        for i in 0..input.queries.nrows() {
            let q: Vec<f64> = input.queries.row(i).iter().copied().collect();
            let m = sparsity_measure(&q, &input.keys, input.keys.ncols()).unwrap();
            prop_assert!(m >= lk.ln() - 1e-12);
        }
    }

    #[test]
    fn distilling_halves_length(len in 1usize..80, d in 1usize..6, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let layer = DistillLayer::random(d, &mut rng);
        let x = DMatrix::from_fn(len, d, |i, j| ((i * 31 + j * 7) % 11) as f64 - 5.0);
        let state = EncoderLayerState { features: x };
        match distill_layer(&state, &layer) {
            Ok(out) => {
                prop_assert_eq!(out.features.nrows(), len / 2);
                prop_assert_eq!(out.features.ncols(), d);
            }
            Err(_) => prop_assert!(len < 3),
        }
    }

    #[test]
    fn statistic_is_non_negative(ev in prop::collection::vec(-5.0f64..5.0, 0..200)) {
        let s = statistic_track(&ev);
        prop_assert!(s.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(s.len(), ev.len());
    }

    #[test]
    fn alarm_count_non_increasing_in_threshold(
        ev in prop::collection::vec(-2.0f64..3.0, 1..300),
        h1 in 0.01f64..10.0,
        dh in 0.0f64..10.0,
    ) {
        let lo = detect(&ev, h1).count();
        let hi = detect(&ev, h1 + dh).count();
        prop_assert!(hi <= lo, "h={} gives {}, h={} gives {}", h1, lo, h1 + dh, hi);
    }

    #[test]
    fn pruned_knn_matches_brute_force(
        (reference, queries, dims) in (1usize..4).prop_flat_map(|d| (
            prop::collection::vec(-5.0f64..5.0, d..d * 60),
            prop::collection::vec(-6.0f64..6.0, d..d * 10),
            Just(d),
        )),
        k in 1usize..4,
    ) {
        let r = TimeSeries::from_flat(reference.len() / dims, dims, reference[..reference.len() / dims * dims].to_vec()).unwrap();
        let q = TimeSeries::from_flat(queries.len() / dims, dims, queries[..queries.len() / dims * dims].to_vec()).unwrap();
        prop_assume!(r.len() >= k);
        let got = knn_distances(&r, &q, k).unwrap();
        for (i, qrow) in q.rows().enumerate() {
            let mut all: Vec<f64> = r
                .rows()
                .map(|rr| rr.iter().zip(qrow).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect();
            all.sort_by(f64::total_cmp);
            prop_assert!((got[i] - all[k - 1]).abs() <= 1e-12);
        }
    }
}

#[test]
fn constant_scores_attain_the_bound() {
    let keys = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    let m = sparsity_measure(&[0.3, -0.7], &keys, 2).unwrap();
    assert!((m - 4f64.ln()).abs() <= 1e-12);
    let m = sparsity_measure(&[0.0, 0.0], &DMatrix::from_row_slice(3, 2, &[1.0, 5.0, -2.0, 0.5, 3.0, 3.0]), 2).unwrap();
    assert!((m - 3f64.ln()).abs() <= 1e-12);
}
