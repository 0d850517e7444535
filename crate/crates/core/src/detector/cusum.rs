use serde::{Deserialize, Serialize};

use crate::data::AlarmTrack;

/// Accumulated CUSUM statistic after `t` updates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CusumState {
    pub s: f64,
    pub t: usize,
}

/// `s' = max(s + d, 0)`.
pub fn cusum_update(state: CusumState, d: f64) -> CusumState {
    CusumState {
        s: (state.s + d).max(0.0),
        t: state.t + 1,
    }
}

/// Statistic trace without resets.
pub fn statistic_track(evidence: &[f64]) -> Vec<f64> {
    evidence
        .iter()
        .scan(CusumState::default(), |st, &d| {
            *st = cusum_update(*st, d);
            Some(st.s)
        })
        .collect()
}

/// Raises an alarm at each `t` where the statistic reaches `h`, resetting the
/// statistic to zero after every alarm.
pub fn detect(evidence: &[f64], h: f64) -> AlarmTrack {
    let mut state = CusumState::default();
    let mut alarms = Vec::new();
    for (t, &d) in evidence.iter().enumerate() {
        state = cusum_update(state, d);
        if state.s >= h {
            alarms.push(t);
            state.s = 0.0;
        }
    }
    AlarmTrack::from_sorted_unchecked(alarms)
}

/// Streaming form of [`detect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumDetector {
    threshold: f64,
    state: CusumState,
}

impl CusumDetector {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            state: CusumState::default(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn state(&self) -> CusumState {
        self.state
    }

    /// Feeds one evidence value; returns true when an alarm fires.
    pub fn push(&mut self, d: f64) -> bool {
        self.state = cusum_update(self.state, d);
        if self.state.s >= self.threshold {
            self.state.s = 0.0;
            true
        } else {
            false
        }
    }

    pub fn reset(&mut self) {
        self.state = CusumState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_floor_and_accumulate() {
        assert_eq!(cusum_update(CusumState { s: 0.0, t: 0 }, -1.0).s, 0.0);
        let st = cusum_update(CusumState { s: 2.0, t: 4 }, 0.5);
        assert_eq!((st.s, st.t), (2.5, 5));
    }

    #[test]
    fn hand_trace() {
        assert_eq!(statistic_track(&[1.0, -3.0, 2.0, 2.0]), vec![1.0, 0.0, 2.0, 4.0]);
    }

    #[test]
    fn detect_cases() {
        assert!(detect(&[-1.0; 20], 0.5).is_empty());
        assert_eq!(detect(&[1.0; 3], 2.5).times(), &[2]);
        assert_eq!(detect(&[1.0; 9], 2.5).times(), &[2, 5, 8]);
        assert!(detect(&[1e9; 10], f64::INFINITY).is_empty());
    }

    #[test]
    fn streaming_matches_batch() {
        let ev = [0.3, -0.1, 0.9, 0.4, -2.0, 1.5, 0.2, 0.8];
        let mut det = CusumDetector::new(1.0);
        let streamed: Vec<usize> = ev
            .iter()
            .enumerate()
            .filter_map(|(t, &d)| det.push(d).then_some(t))
            .collect();
        assert_eq!(streamed, detect(&ev, 1.0).times());
    }
}
