//! Rejection-sampling rules for preference data.
//!
//! A sample is rejected iff `wer > tau_wer_high` or `sr < tau_sr`; the
//! acceptance rule is the exact complement (`wer <= tau_wer_high` and
//! `sr >= tau_sr`), so boundary values are kept.

use super::PipelineError;
use serde::{Deserialize, Serialize};

/// Quality gates; defaults are the production pipeline constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_wer_high: f64,
    pub tau_sr: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tau_wer_high: 0.1,
            tau_sr: 1.5,
        }
    }
}

impl Thresholds {
    pub fn new(tau_wer_high: f64, tau_sr: f64) -> Result<Self, PipelineError> {
        if !(tau_wer_high > 0.0 && tau_sr > 0.0) {
            return Err(PipelineError::InvalidThresholds);
        }
        Ok(Self {
            tau_wer_high,
            tau_sr,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Chosen,
    Rejected,
}

/// Which rejection rule(s) fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    None,
    HighWer,
    SlowRate,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleQuality {
    pub wer: f64,
    pub speaking_rate: f64,
    pub verdict: Verdict,
    pub reason: RejectReason,
}

/// Applies the rejection rules to one sample's measurements.
pub fn classify_sample(wer: f64, speaking_rate: f64, thresholds: &Thresholds) -> SampleQuality {
    let high_wer = wer > thresholds.tau_wer_high;
    let slow = speaking_rate < thresholds.tau_sr;
    let (verdict, reason) = match (high_wer, slow) {
        (false, false) => (Verdict::Chosen, RejectReason::None),
        (true, false) => (Verdict::Rejected, RejectReason::HighWer),
        (false, true) => (Verdict::Rejected, RejectReason::SlowRate),
        (true, true) => (Verdict::Rejected, RejectReason::Both),
    };
    SampleQuality {
        wer,
        speaking_rate,
        verdict,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_applications() {
        let t = Thresholds::default();
        let q = classify_sample(0.12, 2.0, &t);
        assert_eq!((q.verdict, q.reason), (Verdict::Rejected, RejectReason::HighWer));
        let q = classify_sample(0.05, 1.2, &t);
        assert_eq!((q.verdict, q.reason), (Verdict::Rejected, RejectReason::SlowRate));
        let q = classify_sample(0.5, 0.5, &t);
        assert_eq!((q.verdict, q.reason), (Verdict::Rejected, RejectReason::Both));
        let q = classify_sample(0.02, 2.5, &t);
        assert_eq!((q.verdict, q.reason), (Verdict::Chosen, RejectReason::None));
    }

    #[test]
    fn boundary_values_are_chosen() {
        let t = Thresholds::default();
        let q = classify_sample(0.1, 1.5, &t);
        assert_eq!(q.verdict, Verdict::Chosen);
        assert_eq!(q.reason, RejectReason::None);
    }

    #[test]
    fn chosen_is_exact_complement_of_rejected() {
        let t = Thresholds::default();
        for i in 0..=20 {
            for j in 0..=20 {
                let wer = i as f64 / 100.0;
                let sr = j as f64 / 10.0 + 0.5;
                let q = classify_sample(wer, sr, &t);
                let rejected_rule = wer > t.tau_wer_high || sr < t.tau_sr;
                let chosen_rule = wer <= t.tau_wer_high && sr >= t.tau_sr;
                assert_ne!(rejected_rule, chosen_rule);
                assert_eq!(q.verdict == Verdict::Rejected, rejected_rule);
                assert_eq!(q.verdict == Verdict::Chosen, chosen_rule);
                assert_eq!(q.reason == RejectReason::None, q.verdict == Verdict::Chosen);
            }
        }
    }

    #[test]
    fn invalid_thresholds_rejected() {
        assert!(Thresholds::new(0.0, 1.5).is_err());
        assert!(Thresholds::new(0.1, -1.0).is_err());
    }
}
