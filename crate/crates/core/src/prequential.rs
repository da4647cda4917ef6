//! Faded per-class recall for test-then-train evaluation.
//!
//! Each class keeps its own faded hit and seen counters; they decay only when
//! an instance of that class arrives:
//!
//! ```text
//! hits_c <- theta * hits_c + [pred == c]
//! seen_c <- theta * seen_c + 1
//! R_c     = hits_c / seen_c
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrequentialState {
    theta: f64,
    hits: [f64; 2],
    seen: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamMetrics {
    pub r0: f64,
    pub r1: f64,
    pub gmean: f64,
    pub abs_diff: f64,
}

impl StreamMetrics {
    pub fn from_recalls(r0: f64, r1: f64) -> Self {
        Self {
            r0,
            r1,
            gmean: (r0 * r1).sqrt(),
            abs_diff: (r1 - r0).abs(),
        }
    }
}

impl PrequentialState {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Config(format!(
                "fading factor {theta} outside (0, 1]"
            )));
        }
        Ok(Self {
            theta,
            hits: [0.0; 2],
            seen: [0.0; 2],
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn update(&mut self, true_label: u8, predicted_label: u8) {
        let c = usize::from(true_label != 0);
        let hit = f64::from(u8::from((predicted_label != 0) == (c == 1)));
        self.hits[c] = self.theta * self.hits[c] + hit;
        self.seen[c] = self.theta * self.seen[c] + 1.0;
    }

    /// Value-semantics form of [`update`](Self::update).
    pub fn updated(mut self, true_label: u8, predicted_label: u8) -> Self {
        self.update(true_label, predicted_label);
        self
    }

    pub fn recall(&self, class: u8) -> f64 {
        let c = usize::from(class != 0);
        if self.seen[c] > 0.0 {
            self.hits[c] / self.seen[c]
        } else {
            0.0
        }
    }

    pub fn faded_hits(&self, class: u8) -> f64 {
        self.hits[usize::from(class != 0)]
    }

    pub fn faded_seen(&self, class: u8) -> f64 {
        self.seen[usize::from(class != 0)]
    }

    pub fn snapshot(&self) -> StreamMetrics {
        StreamMetrics::from_recalls(self.recall(0), self.recall(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_correct_positive() {
        let s = PrequentialState::new(0.99).unwrap().updated(1, 1);
        assert_eq!(s.recall(1), 1.0);
        assert_eq!(s.recall(0), 0.0);
        assert_eq!(s.snapshot().gmean, 0.0);
    }

    #[test]
    fn cumulative_counting_with_theta_one() {
        let mut s = PrequentialState::new(1.0).unwrap();
        for (t, p) in [(1, 1), (1, 0), (0, 0)] {
            s.update(t, p);
        }
        let m = s.snapshot();
        assert_eq!(m.r1, 0.5);
        assert_eq!(m.r0, 1.0);
        assert!((m.gmean - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.abs_diff, 0.5);
    }

    #[test]
    fn faded_three_event_example() {
        let mut s = PrequentialState::new(0.99).unwrap();
        for p in [1, 0, 1] {
            s.update(1, p);
        }
        let expected = (0.99f64 * 0.99 + 1.0) / (0.99 * 0.99 + 0.99 + 1.0);
        assert!((s.recall(1) - expected).abs() < 1e-15);
        assert!((s.recall(1) - 0.666_678).abs() < 1e-6);
    }

    #[test]
    fn snapshot_boundaries() {
        let m = StreamMetrics::from_recalls(0.5, 0.5);
        assert_eq!((m.gmean, m.abs_diff), (0.5, 0.0));
        let m = StreamMetrics::from_recalls(1.0, 0.0);
        assert_eq!((m.gmean, m.abs_diff), (0.0, 1.0));
    }

    #[test]
    fn invalid_theta() {
        assert!(PrequentialState::new(0.0).is_err());
        assert!(PrequentialState::new(1.01).is_err());
        assert!(PrequentialState::new(f64::NAN).is_err());
    }

    fn stream() -> impl Strategy<Value = Vec<(u8, u8)>> {
        prop::collection::vec((0u8..2, 0u8..2), 0..300)
    }

    proptest! {
        #[test]
        fn recalls_stay_in_unit_interval(theta in 0.01f64..=1.0, events in stream()) {
            let mut s = PrequentialState::new(theta).unwrap();
            for (t, p) in events {
                s.update(t, p);
                for c in 0..2 {
                    prop_assert!(s.faded_hits(c) <= s.faded_seen(c) + 1e-12);
                    let r = s.recall(c);
                    prop_assert!((0.0..=1.0).contains(&r));
                }
                let m = s.snapshot();
                if m.r0 == 0.0 || m.r1 == 0.0 {
                    prop_assert_eq!(m.gmean, 0.0);
                }
            }
        }

        #[test]
        fn later_hit_counts_more(theta in 0.5f64..0.999) {
            // same class, one hit and one miss: hit-last beats hit-first
            let early = PrequentialState::new(theta).unwrap().updated(1, 1).updated(1, 0);
            let late = PrequentialState::new(theta).unwrap().updated(1, 0).updated(1, 1);
            prop_assert!(late.recall(1) >= early.recall(1));
        }
    }
}
