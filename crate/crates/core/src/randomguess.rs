//! The Random Guess baseline: i.i.d. Bernoulli alarms, scored under the
//! point-adjust protocol both analytically and by simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabelTrack;
use crate::error::{Error, Result};
use crate::metrics::{adjusted_prf, f1_score};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomGuessSpec {
    pub p: f64,
    pub seed: u64,
}

impl RandomGuessSpec {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(format!(
                "alarm probability {p} outside [0, 1]"
            )));
        }
        Ok(Self { p, seed })
    }
}

/// Expected point-adjusted counts and the precision/recall built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedAdjustedPr {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub expected_tp: f64,
    pub expected_fp: f64,
    pub expected_fn: f64,
}

/// Ratio of expectations for Random Guess under point adjustment:
/// `E[TP] = sum M_i (1 - (1-p)^M_i)`, `E[FN] = sum M_i (1-p)^M_i`, `E[FP] = N p`.
pub fn expected_adjusted_pr(
    p: f64,
    segment_lengths: &[usize],
    n_nominal: usize,
) -> Result<ExpectedAdjustedPr> {
    if segment_lengths.is_empty() {
        return Err(Error::validation("segment length list is empty"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!(
            "alarm probability {p} outside [0, 1]"
        )));
    }
    if let Some(i) = segment_lengths.iter().position(|&m| m == 0) {
        return Err(Error::validation(format!("segment {i} has zero length")));
    }
    if p == 0.0 {
        let total: usize = segment_lengths.iter().sum();
        return Ok(ExpectedAdjustedPr {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            expected_tp: 0.0,
            expected_fp: 0.0,
            expected_fn: total as f64,
        });
    }
    let (tp, fn_) = segment_lengths.iter().fold((0.0, 0.0), |(tp, fn_), &m| {
        let m_f = m as f64;
        let miss = (1.0 - p).powi(m.min(i32::MAX as usize) as i32);
        (tp + m_f * (1.0 - miss), fn_ + m_f * miss)
    });
    let fp = n_nominal as f64 * p;
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    Ok(ExpectedAdjustedPr {
        precision,
        recall,
        f1: f1_score(precision, recall),
        expected_tp: tp,
        expected_fp: fp,
        expected_fn: fn_,
    })
}

/// Stream-splitting seed derivation (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate_random_guess(spec: &RandomGuessSpec, len: usize) -> LabelTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    bernoulli_track(&mut rng, spec.p, len)
}

fn bernoulli_track(rng: &mut impl Rng, p: f64, len: usize) -> LabelTrack {
    // random::<f64>() is in [0, 1), so p = 0 and p = 1 are exact
    LabelTrack::new((0..len).map(|_| rng.random::<f64>() < p).collect())
}

/// Mean and standard error of one simulated quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn finish(&self) -> MeanStderr {
        let stderr = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        MeanStderr {
            mean: self.mean,
            stderr,
        }
    }
}

/// Simulation summary over independent trials. `f1`, `precision` and `recall`
/// are expectations of per-trial ratios; the counts are per-trial means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub f1: MeanStderr,
    pub precision: MeanStderr,
    pub recall: MeanStderr,
    pub tp: MeanStderr,
    pub fp: MeanStderr,
    pub fn_: MeanStderr,
    pub instance_f1: MeanStderr,
}

/// Trial `i` draws from its own generator seeded by `derive_seed(seed, i)`,
/// so results do not depend on how trials are scheduled.
pub fn monte_carlo_summary(
    spec: &RandomGuessSpec,
    truth: &LabelTrack,
    trials: usize,
) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return Err(Error::validation("need at least one trial"));
    }
    let mut acc: [Accumulator; 7] = Default::default();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, trial as u64));
        let pred = bernoulli_track(&mut rng, spec.p, truth.len());
        let adj = adjusted_prf(&pred, truth)?;
        let inst = crate::metrics::instance_prf(&pred, truth)?;
        let values = [
            adj.f1,
            adj.precision,
            adj.recall,
            adj.tp as f64,
            adj.fp as f64,
            adj.fn_ as f64,
            inst.f1,
        ];
        for (a, v) in acc.iter_mut().zip(values) {
            a.push(v);
        }
    }
    Ok(MonteCarloSummary {
        trials,
        f1: acc[0].finish(),
        precision: acc[1].finish(),
        recall: acc[2].finish(),
        tp: acc[3].finish(),
        fp: acc[4].finish(),
        fn_: acc[5].finish(),
        instance_f1: acc[6].finish(),
    })
}

/// Mean and standard error of the point-adjusted F1.
pub fn monte_carlo_adjusted_f1(
    spec: &RandomGuessSpec,
    truth: &LabelTrack,
    trials: usize,
) -> Result<(f64, f64)> {
    let s = monte_carlo_summary(spec, truth, trials)?;
    Ok((s.f1.mean, s.f1.stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_alarm() {
        let r = expected_adjusted_pr(1.0, &[10], 100).unwrap();
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.precision, 10.0 / 110.0);
    }

    #[test]
    fn zero_probability_convention() {
        let r = expected_adjusted_pr(0.0, &[10, 3], 100).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn half_probability() {
        let r = expected_adjusted_pr(0.5, &[10], 100).unwrap();
        let tp = 10.0 * (1.0 - 0.5f64.powi(10));
        assert!((r.recall - 0.999_023_437_5).abs() < 1e-12);
        assert!((r.precision - tp / (tp + 50.0)).abs() < 1e-15);
        assert!((r.precision - 0.16653).abs() < 1e-5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(expected_adjusted_pr(0.1, &[], 10).is_err());
        assert!(expected_adjusted_pr(1.5, &[1], 10).is_err());
        assert!(expected_adjusted_pr(0.1, &[0], 10).is_err());
        assert!(RandomGuessSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn degenerate_simulations() {
        let zeros = simulate_random_guess(&RandomGuessSpec::new(0.0, 3).unwrap(), 50);
        assert_eq!(zeros.positives(), 0);
        let ones = simulate_random_guess(&RandomGuessSpec::new(1.0, 3).unwrap(), 50);
        assert_eq!(ones.positives(), 50);
    }

    #[test]
    fn fair_coin_frequency() {
        let t = simulate_random_guess(&RandomGuessSpec::new(0.5, 11).unwrap(), 100_000);
        let frac = t.positives() as f64 / 1e5;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn seed_determines_output() {
        let s = RandomGuessSpec::new(0.3, 99).unwrap();
        assert_eq!(simulate_random_guess(&s, 1000), simulate_random_guess(&s, 1000));
        let other = RandomGuessSpec::new(0.3, 100).unwrap();
        assert_ne!(simulate_random_guess(&s, 1000), simulate_random_guess(&other, 1000));
    }

    #[test]
    fn all_nominal_truth_has_zero_f1() {
        let truth = LabelTrack::zeros(200);
        let (mean, _) =
            monte_carlo_adjusted_f1(&RandomGuessSpec::new(0.2, 1).unwrap(), &truth, 50).unwrap();
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn certain_alarm_matches_analytic_exactly() {
        let mut labels = vec![false; 100];
        labels.extend(vec![true; 10]);
        labels.extend(vec![false; 20]);
        let truth = LabelTrack::new(labels);
        let (mean, stderr) =
            monte_carlo_adjusted_f1(&RandomGuessSpec::new(1.0, 5).unwrap(), &truth, 20).unwrap();
        let analytic = expected_adjusted_pr(1.0, &[10], 120).unwrap();
        assert!((mean - analytic.f1).abs() < 1e-15);
        assert_eq!(stderr, 0.0);
    }

    #[test]
    fn simulated_f1_tracks_analytic() {
        let mut labels = vec![false; 50];
        labels.extend(vec![true; 10]);
        labels.extend(vec![false; 50]);
        let truth = LabelTrack::new(labels);
        let spec = RandomGuessSpec::new(0.5, 2024).unwrap();
        let (mean, stderr) = monte_carlo_adjusted_f1(&spec, &truth, 10_000).unwrap();
        let analytic = expected_adjusted_pr(0.5, &[10], 100).unwrap();
        // ratio of expectations vs expectation of ratios differ by a sliver here
        assert!((mean - analytic.f1).abs() < 3.0 * stderr + 2e-3, "{mean} {} {stderr}", analytic.f1);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
