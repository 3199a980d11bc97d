//! Independent re-checking of a recorded transcript.
//!
//! Nothing about how the transcript was produced is trusted: losses are
//! recomputed from the advice, the supermartingale `Q` is replayed from the
//! priors (uniform unless the transcript carries them), and every bound is
//! checked after every step.

use alloc::format;
use alloc::vec::Vec;

use super::{LedgerReport, ProtocolError, RegretLedger, Transcript, BOUND_TOL};
use crate::loss::Outcome;
use crate::math::{ln, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack on regret bounds.
    pub bound: f64,
    /// Relative slack on `Q_t ≤ Q_{t−1}`, applied as
    /// `ln Q_t ≤ ln Q_{t−1} + monotone`. Since `Q ≤ 1` along any valid
    /// transcript this also bounds the absolute growth.
    pub monotone: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { bound: BOUND_TOL, monotone: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub steps: usize,
    /// `ln Q_0, ln Q_1, …, ln Q_T`.
    pub log_q: Vec<f64>,
    /// First step (1-based) at which `Q` grew by more than the tolerance.
    pub monotonicity_break: Option<usize>,
    /// First step whose prediction would let `Q` grow under one of the two
    /// outcomes.
    pub step_break: Option<usize>,
    /// First step (1-based) and row at which a regret bound failed.
    pub bound_break: Option<(usize, usize)>,
    pub ledger: LedgerReport,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_break.is_none() && self.step_break.is_none() && self.bound_break.is_none()
    }

    /// Earliest failing step.
    pub fn first_failing_step(&self) -> Option<usize> {
        [self.monotonicity_break, self.step_break, self.bound_break.map(|b| b.0)].into_iter().flatten().min()
    }
}

fn invalid(step: usize, reason: alloc::string::String) -> ProtocolError {
    ProtocolError::InvalidTranscript { step, reason }
}

fn advance(log_w: &[f64], factors: impl Iterator<Item = f64>) -> Vec<f64> {
    log_w
        .iter()
        .zip(factors)
        .map(|(&lw, f)| if lw == f64::NEG_INFINITY || f == 0.0 { lw } else { lw + f })
        .collect()
}

fn log_q_value(log_w: &[f64]) -> f64 {
    if log_w.is_empty() {
        0.0
    } else {
        log_sum_exp(log_w)
    }
}

fn grew(before: f64, after: f64, tol: f64) -> bool {
    // a NaN counts as growth
    !(after <= before + tol || after == f64::NEG_INFINITY)
}

/// Re-checks a transcript. Malformed transcripts are an `Err`; failed checks
/// are reported in the `Ok` value.
pub fn verify_transcript(transcript: &Transcript, tol: Tolerances) -> Result<VerifyReport, ProtocolError> {
    let n = transcript.n_experts().unwrap_or_default();
    let log_priors: Vec<f64> = match &transcript.priors {
        Some(p) => {
            if p.len() != n {
                return Err(invalid(0, format!("{} priors for {n} experts", p.len())));
            }
            if p.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(invalid(0, format!("priors must be positive: {p:?}")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(0, format!("priors sum to {total}")));
            }
            p.iter().map(|&x| ln(x)).collect()
        }
        None => alloc::vec![-ln(n as f64); n],
    };

    let labels = (0..n).map(|i| format!("expert#{i}")).collect();
    let mut ledger = RegretLedger::new(labels, transcript.priors.as_deref());
    let mut log_w = log_priors;
    let mut log_q = alloc::vec![log_q_value(&log_w)];
    let mut monotonicity_break = None;
    let mut step_break = None;
    let mut bound_break = None;

    for (i, step) in transcript.steps.iter().enumerate() {
        let t = i + 1;
        if step.advice.len() != n {
            return Err(invalid(t, format!("{} advice entries, expected {n}", step.advice.len())));
        }
        for (expert, a) in step.advice.iter().enumerate() {
            a.validate().map_err(|reason| ProtocolError::InvalidAdvice { step: t, expert, reason })?;
        }
        let before = *log_q.last().unwrap_or(&0.0);
        if step_break.is_none() {
            let grows = Outcome::BOTH.iter().any(|&w| {
                let next = advance(&log_w, step.advice.iter().map(|a| a.log_factor(step.prediction, w)));
                grew(before, log_q_value(&next), tol.monotone)
            });
            if grows {
                step_break = Some(t);
            }
        }
        log_w = advance(&log_w, step.advice.iter().map(|a| a.log_factor(step.prediction, step.outcome)));
        let now = log_q_value(&log_w);
        if monotonicity_break.is_none() && grew(before, now, tol.monotone) {
            monotonicity_break = Some(t);
        }
        log_q.push(now);
        ledger.record(&step.advice, step.prediction, step.outcome);
        if bound_break.is_none() {
            bound_break = ledger.first_violation(tol.bound).map(|row| (t, row));
        }
    }

    Ok(VerifyReport {
        steps: transcript.len(),
        log_q,
        monotonicity_break,
        step_break,
        bound_break,
        ledger: ledger.report(tol.bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ExpertAdvice;
    use crate::loss::{LossSpec, Prediction};
    use crate::protocols::Step;

    #[test]
    fn empty_transcript_is_vacuous() {
        let report = verify_transcript(&Transcript::new(), Tolerances::default()).unwrap();
        assert!(report.passed());
        assert_eq!(report.log_q, alloc::vec![0.0]);
    }

    #[test]
    fn overconfident_learner_is_caught() {
        let mut tr = Transcript::new();
        let advice = alloc::vec![ExpertAdvice::predict(Prediction::HALF, 1.0, LossSpec::Log)];
        tr.push(Step { advice, prediction: Prediction::new(0.1).unwrap(), outcome: Outcome::One });
        let report = verify_transcript(&tr, Tolerances::default()).unwrap();
        assert_eq!(report.monotonicity_break, Some(1));
        assert_eq!(report.step_break, Some(1));
        assert_eq!(report.bound_break, Some((1, 0)));
        assert_eq!(report.first_failing_step(), Some(1));
    }

    #[test]
    fn ragged_transcript_is_malformed() {
        let mut tr = Transcript::new();
        let one = alloc::vec![ExpertAdvice::predict(Prediction::HALF, 1.0, LossSpec::Log)];
        tr.push(Step { advice: one.clone(), prediction: Prediction::HALF, outcome: Outcome::One });
        tr.push(Step { advice: [one.clone(), one].concat(), prediction: Prediction::HALF, outcome: Outcome::One });
        assert!(matches!(
            verify_transcript(&tr, Tolerances::default()),
            Err(ProtocolError::InvalidTranscript { step: 2, .. })
        ));
    }
}
