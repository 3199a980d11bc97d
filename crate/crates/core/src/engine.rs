//! Defensive forecasting for experts who supply their own loss functions.
//!
//! Expert `n` is tracked by `Q^n = Π_t e^{η^n_t(λ^n_t(π_t,ω_t) − λ^n_t(γ^n_t,ω_t))}`,
//! the learner's tracked quantity is the mixture `Q = (1/N)·Σ_n Q^n`. Every
//! `Q^n` is a forecast-continuous supermartingale when `λ^n_t` is proper and
//! `η^n_t`-mixable, so the learner can always find a `π` with
//! `f_t(π, ω) ≤ 0` for both outcomes; `Q` never grows and each `Q^n ≤ N`.
//!
//! The state is kept as `ln Q^n` and every sum is formed after shifting by
//! the largest `ln Q^n`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::loss::{LossFunction, LossSpec, Outcome, Prediction};
use crate::math::{bisect_decreasing, exp, expm1, ln, log_sum_exp, loss_diff};

/// Width at which the root search for `π` stops. Zero searches down to
/// floating-point resolution, which matters for roots close to 0 or 1.
pub const ROOT_TOL: f64 = 0.0;
/// Iteration cap of the root search.
pub const ROOT_MAX_ITER: usize = 200;
/// Slack allowed on `f_t(π, ω) ≤ 0` and on `Q_t ≤ Q_{t−1}`.
pub const STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("expected advice from {expected} experts, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid advice from expert {expert}: {reason}")]
    InvalidAdvice { expert: usize, reason: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

/// An expert's move for one step: a prediction or an abstention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advice {
    Predict(Prediction),
    Abstain,
}

impl Advice {
    pub fn prediction(self) -> Option<Prediction> {
        match self {
            Advice::Predict(g) => Some(g),
            Advice::Abstain => None,
        }
    }

    pub fn is_awake(self) -> bool {
        matches!(self, Advice::Predict(_))
    }
}

/// One expert's announcement: prediction (or abstention), learning rate and
/// the loss function that judges this expert and the learner this step.
///
/// An abstaining expert is scored with the zero loss, so its factor is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertAdvice {
    pub advice: Advice,
    pub eta: f64,
    pub loss: LossSpec,
}

impl ExpertAdvice {
    pub fn predict(gamma: Prediction, eta: f64, loss: LossSpec) -> Self {
        ExpertAdvice { advice: Advice::Predict(gamma), eta, loss }
    }

    pub fn abstain(eta: f64, loss: LossSpec) -> Self {
        ExpertAdvice { advice: Advice::Abstain, eta, loss }
    }

    /// Checks `0 < η ≤ η_max(λ)` and that `λ` is a proper catalogue loss.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(format!("learning rate {} must be positive and finite", self.eta));
        }
        self.loss.validate().map_err(|e| format!("{e}"))?;
        if !self.loss.is_proper() {
            return Err(format!("loss {} is not proper", self.loss));
        }
        let eta_max = self.loss.mixability_constant().map_err(|e| format!("{e}"))?;
        if self.eta > eta_max * (1.0 + 1e-12) {
            return Err(format!(
                "learning rate {} exceeds the mixability constant {} of loss {}",
                self.eta, eta_max, self.loss
            ));
        }
        Ok(())
    }

    /// This step's loss of a learner predicting `pi`, as this expert scores
    /// it (zero when the expert abstains).
    pub fn learner_loss(&self, pi: Prediction, omega: Outcome) -> f64 {
        match self.advice {
            Advice::Predict(_) => self.loss.evaluate(pi, omega),
            Advice::Abstain => 0.0,
        }
    }

    /// This step's loss of the expert (zero when abstaining).
    pub fn expert_loss(&self, omega: Outcome) -> f64 {
        match self.advice {
            Advice::Predict(g) => self.loss.evaluate(g, omega),
            Advice::Abstain => 0.0,
        }
    }

    /// `η·(λ(π,ω) − λ(γ,ω))` under the `∞ − ∞ = 0` convention.
    pub fn log_factor(&self, pi: Prediction, omega: Outcome) -> f64 {
        match self.advice {
            Advice::Predict(g) => {
                let d = loss_diff(self.loss.evaluate(pi, omega), self.loss.evaluate(g, omega));
                if d == 0.0 {
                    0.0
                } else {
                    self.eta * d
                }
            }
            Advice::Abstain => 0.0,
        }
    }
}

/// `e^{η(λ(π,ω) − λ(γ,ω))}`, the one-step factor of `Q^n`.
pub fn step_factor(advice: &ExpertAdvice, pi: Prediction, omega: Outcome) -> f64 {
    exp(advice.log_factor(pi, omega))
}

/// Left side of `π·e^{η(λ(π,1)−λ(γ,1))} + (1−π)·e^{η(λ(π,0)−λ(γ,0))} ≤ 1`,
/// the one-step supermartingale inequality of `Q^n`.
pub fn step_supermartingale_value(advice: &ExpertAdvice, pi: Prediction) -> f64 {
    let p = pi.get();
    let term = |w: f64, outcome: Outcome| {
        if w == 0.0 {
            0.0
        } else {
            w * step_factor(advice, pi, outcome)
        }
    };
    term(p, Outcome::One) + term(1.0 - p, Outcome::Zero)
}

/// Whether the one-step supermartingale inequality holds within `1e−12`.
pub fn verify_step_supermartingale(advice: &ExpertAdvice, pi: Prediction) -> bool {
    step_supermartingale_value(advice, pi) <= 1.0 + 1e-12
}

/// Which rule of the prediction step produced `π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `f_t(0, 1) ≤ 0`.
    EndpointZero,
    /// `f_t(1, 0) ≤ 0`.
    EndpointOne,
    /// `f_t(π, 1) = f_t(π, 0)` solved by bisection.
    Root,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub prediction: Prediction,
    pub branch: Branch,
    /// `f_t(π,1) − f_t(π,0)` at the returned `π` for [`Branch::Root`], the
    /// endpoint value of `f_t` otherwise.
    pub root_residual: f64,
}

/// `ln Q^n` for every expert after `step` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorState {
    log_q: Vec<f64>,
    step: usize,
}

impl EvaluatorState {
    /// Fresh state: `Q^n = 1` for all `n`.
    pub fn new(n_experts: usize) -> Self {
        EvaluatorState { log_q: vec![0.0; n_experts], step: 0 }
    }

    pub fn from_log_values(log_q: Vec<f64>, step: usize) -> Self {
        EvaluatorState { log_q, step }
    }

    pub fn n_experts(&self) -> usize {
        self.log_q.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `ln Q^n` per expert.
    pub fn log_values(&self) -> &[f64] {
        &self.log_q
    }

    /// `ln Q = ln((1/N)·Σ_n Q^n)`.
    pub fn log_mixture(&self) -> f64 {
        log_sum_exp(&self.log_q) - ln(self.log_q.len() as f64)
    }

    pub fn mixture(&self) -> f64 {
        exp(self.log_mixture())
    }

    fn check_len(&self, advice: &[ExpertAdvice]) -> Result<(), EngineError> {
        if advice.len() == self.log_q.len() {
            Ok(())
        } else {
            Err(EngineError::LengthMismatch { expected: self.log_q.len(), got: advice.len() })
        }
    }

    /// Shift `M = max_n ln Q^n` and the relative weights `e^{ln Q^n − M}`.
    fn shifted_weights(&self) -> (f64, Vec<f64>) {
        let max = self.log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return (0.0, vec![0.0; self.log_q.len()]);
        }
        (max, self.log_q.iter().map(|&l| exp(l - max)).collect())
    }

    /// `N·f_t(π, ω)·e^{−M}`.
    fn scaled_increment(weights: &[f64], advice: &[ExpertAdvice], pi: Prediction, omega: Outcome) -> f64 {
        weights
            .iter()
            .zip(advice)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, a)| w * expm1(a.log_factor(pi, omega)))
            .sum()
    }

    /// `N·(f_t(π,1) − f_t(π,0))·e^{−M}` for interior `π`.
    fn scaled_gap(weights: &[f64], advice: &[ExpertAdvice], pi: Prediction) -> f64 {
        weights
            .iter()
            .zip(advice)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, a)| w * (exp(a.log_factor(pi, Outcome::One)) - exp(a.log_factor(pi, Outcome::Zero))))
            .sum()
    }

    /// `f_t(π, ω) = Q(history, π, ω) − Q(history)`.
    pub fn f_t(&self, advice: &[ExpertAdvice], pi: Prediction, omega: Outcome) -> Result<f64, EngineError> {
        self.check_len(advice)?;
        let (max, weights) = self.shifted_weights();
        let scaled = Self::scaled_increment(&weights, advice, pi, omega);
        Ok(scaled * exp(max) / self.log_q.len() as f64)
    }

    /// The defensive forecasting prediction for this step's advice.
    pub fn choose_prediction(&self, advice: &[ExpertAdvice]) -> Result<StepDecision, EngineError> {
        self.check_len(advice)?;
        for (expert, a) in advice.iter().enumerate() {
            a.validate().map_err(|reason| EngineError::InvalidAdvice { expert, reason })?;
        }
        let (max, weights) = self.shifted_weights();
        let unscale = exp(max) / self.log_q.len() as f64;

        let at_zero = Self::scaled_increment(&weights, advice, Prediction::ZERO, Outcome::One);
        if at_zero <= 0.0 {
            return Ok(StepDecision {
                prediction: Prediction::ZERO,
                branch: Branch::EndpointZero,
                root_residual: at_zero * unscale,
            });
        }
        let at_one = Self::scaled_increment(&weights, advice, Prediction::ONE, Outcome::Zero);
        if at_one <= 0.0 {
            return Ok(StepDecision {
                prediction: Prediction::ONE,
                branch: Branch::EndpointOne,
                root_residual: at_one * unscale,
            });
        }
        if at_zero.is_nan() || at_one.is_nan() {
            return Err(EngineError::InvariantViolation(format!(
                "f_t is undefined at an endpoint on step {}",
                self.step + 1
            )));
        }

        let gap = |p: f64| Self::scaled_gap(&weights, advice, Prediction::clamped(p));
        let bracket = bisect_decreasing(gap, 0.0, 1.0, ROOT_TOL, ROOT_MAX_ITER).ok_or_else(|| {
            EngineError::InvariantViolation(format!("root search produced NaN on step {}", self.step + 1))
        })?;
        let total: f64 = weights.iter().sum();
        let worst = |p: Prediction| {
            Outcome::BOTH.iter().map(|&w| Self::scaled_increment(&weights, advice, p, w)).fold(f64::NEG_INFINITY, f64::max)
        };
        let prediction = [bracket.lo, bracket.midpoint(), bracket.hi]
            .into_iter()
            .map(Prediction::clamped)
            .map(|p| (p, worst(p)))
            .fold((Prediction::HALF, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
            .0;

        for omega in Outcome::BOTH {
            let relative = Self::scaled_increment(&weights, advice, prediction, omega) / total;
            if relative > STEP_TOL {
                return Err(EngineError::InvariantViolation(format!(
                    "f_t({prediction}, {}) = {relative:e}·Q > 0 on step {}",
                    omega.bit(),
                    self.step + 1
                )));
            }
        }
        Ok(StepDecision {
            prediction,
            branch: Branch::Root,
            root_residual: Self::scaled_gap(&weights, advice, prediction) * unscale,
        })
    }

    /// Multiplies every `Q^n` by its step factor for the realised outcome.
    pub fn update(&mut self, advice: &[ExpertAdvice], pi: Prediction, omega: Outcome) -> Result<(), EngineError> {
        self.check_len(advice)?;
        let mut next = self.log_q.clone();
        for (n, (lq, a)) in next.iter_mut().zip(advice).enumerate() {
            if *lq == f64::NEG_INFINITY {
                continue;
            }
            let step = a.log_factor(pi, omega);
            if step == f64::INFINITY {
                return Err(EngineError::InvariantViolation(format!(
                    "learner loss is infinite where expert {n} is finite on step {}",
                    self.step + 1
                )));
            }
            *lq += step;
        }
        self.log_q = next;
        self.step += 1;
        Ok(())
    }
}

/// A learner that plays defensive forecasting.
#[derive(Debug, Clone, PartialEq)]
pub struct DefensiveForecaster {
    state: EvaluatorState,
}

impl DefensiveForecaster {
    pub fn new(n_experts: usize) -> Self {
        DefensiveForecaster { state: EvaluatorState::new(n_experts) }
    }

    pub fn state(&self) -> &EvaluatorState {
        &self.state
    }

    pub fn predict(&self, advice: &[ExpertAdvice]) -> Result<StepDecision, EngineError> {
        self.state.choose_prediction(advice)
    }

    pub fn observe(&mut self, advice: &[ExpertAdvice], pi: Prediction, omega: Outcome) -> Result<(), EngineError> {
        self.state.update(advice, pi, omega)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Prediction {
        Prediction::new(x).unwrap()
    }

    fn log_advice(g: f64) -> ExpertAdvice {
        ExpertAdvice::predict(p(g), 1.0, LossSpec::Log)
    }

    #[test]
    fn step_factor_examples() {
        assert_eq!(step_factor(&log_advice(0.5), p(0.5), Outcome::One), 1.0);
        assert!((step_factor(&log_advice(0.8), p(0.5), Outcome::One) - 1.6).abs() < 1e-14);
        let sq = ExpertAdvice::predict(p(1.0), 2.0, LossSpec::Square);
        assert!((step_factor(&sq, p(0.0), Outcome::One) - core::f64::consts::E.powi(2)).abs() < 1e-12);
        // ∞ − ∞ = 0, finite − ∞ gives factor 0, ∞ − finite gives +∞
        assert_eq!(step_factor(&log_advice(0.0), p(0.0), Outcome::One), 1.0);
        assert_eq!(step_factor(&log_advice(0.0), p(0.5), Outcome::One), 0.0);
        assert_eq!(step_factor(&log_advice(0.5), p(0.0), Outcome::One), f64::INFINITY);
        assert_eq!(step_factor(&ExpertAdvice::abstain(1.0, LossSpec::Log), p(0.0), Outcome::One), 1.0);
    }

    #[test]
    fn f_t_examples() {
        let fresh1 = EvaluatorState::new(1);
        assert_eq!(fresh1.f_t(&[log_advice(0.5)], p(0.5), Outcome::One).unwrap(), 0.0);
        // direct evaluation: Q(after) − Q(before) = 1.6 − 1
        let direct = 0.8 / 0.5 - 1.0;
        let got = fresh1.f_t(&[log_advice(0.8)], p(0.5), Outcome::One).unwrap();
        assert!((got - direct).abs() < 1e-14);
        let fresh2 = EvaluatorState::new(2);
        let got = fresh2.f_t(&[log_advice(0.8), log_advice(0.2)], p(0.5), Outcome::One).unwrap();
        assert!(got.abs() < 1e-15);
        assert!(matches!(fresh2.f_t(&[log_advice(0.8)], p(0.5), Outcome::One), Err(EngineError::LengthMismatch { .. })));
    }

    #[test]
    fn single_expert_is_copied() {
        for (loss, eta) in [(LossSpec::Log, 1.0), (LossSpec::Square, 2.0), (LossSpec::GeneralizedLog { eta: 0.5 }, 0.5)] {
            for g in [0.13, 0.5, 0.77] {
                let advice = [ExpertAdvice::predict(p(g), eta, loss.clone())];
                let state = EvaluatorState::new(1);
                let d = state.choose_prediction(&advice).unwrap();
                assert_eq!(d.branch, Branch::Root);
                assert!((d.prediction.get() - g).abs() < 1e-11, "{loss} {g}: {}", d.prediction);
                for w in Outcome::BOTH {
                    assert!(state.f_t(&advice, d.prediction, w).unwrap().abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn two_log_experts_give_bayes_mixture() {
        let d = EvaluatorState::new(2).choose_prediction(&[log_advice(0.2), log_advice(0.6)]).unwrap();
        assert!((d.prediction.get() - 0.4).abs() < 1e-11);
    }

    #[test]
    fn endpoint_zero_branch() {
        let state = EvaluatorState::new(2);
        let advice = [log_advice(0.0), log_advice(0.0)];
        let d = state.choose_prediction(&advice).unwrap();
        assert_eq!(d.branch, Branch::EndpointZero);
        assert_eq!(d.prediction, Prediction::ZERO);
        assert!(state.f_t(&advice, Prediction::ZERO, Outcome::One).unwrap() <= 0.0);
        let d = state.choose_prediction(&[log_advice(1.0), log_advice(1.0)]).unwrap();
        assert_eq!(d.branch, Branch::EndpointOne);
        assert_eq!(d.prediction, Prediction::ONE);
    }

    #[test]
    fn rejects_learning_rate_above_mixability() {
        let advice = [ExpertAdvice::predict(p(0.3), 2.5, LossSpec::Square)];
        assert!(matches!(
            EvaluatorState::new(1).choose_prediction(&advice),
            Err(EngineError::InvalidAdvice { expert: 0, .. })
        ));
    }

    #[test]
    fn update_examples() {
        let mut s = EvaluatorState::new(1);
        s.update(&[log_advice(0.5)], p(0.5), Outcome::One).unwrap();
        assert_eq!(s.log_values(), &[0.0]);
        assert_eq!(s.step(), 1);

        let mut s = EvaluatorState::new(2);
        s.update(&[log_advice(0.8), log_advice(0.2)], p(0.5), Outcome::One).unwrap();
        assert!((s.log_values()[0] - ln(1.6)).abs() < 1e-14);
        assert!((s.log_values()[1] - ln(0.4)).abs() < 1e-14);

        let mut s = EvaluatorState::new(1);
        assert!(matches!(
            s.update(&[log_advice(0.5)], p(0.0), Outcome::One),
            Err(EngineError::InvariantViolation(_))
        ));
        // dead experts stay dead
        let mut s = EvaluatorState::new(2);
        s.update(&[log_advice(0.0), log_advice(0.5)], p(0.5), Outcome::One).unwrap();
        assert_eq!(s.log_values()[0], f64::NEG_INFINITY);
        s.update(&[log_advice(0.5), log_advice(0.5)], p(0.0), Outcome::Zero).unwrap();
        assert_eq!(s.log_values()[0], f64::NEG_INFINITY);
    }

    #[test]
    fn supermartingale_step_examples() {
        let v = step_supermartingale_value(&log_advice(0.5), p(0.5));
        assert!((v - 1.0).abs() < 1e-15);
        let sq = ExpertAdvice::predict(p(0.9), 2.0, LossSpec::Square);
        // 0.1·e^{2(0.81−0.01)} + 0.9·e^{2(0.01−0.81)}
        let hand = 0.1 * exp(1.6) + 0.9 * exp(-1.6);
        assert!((step_supermartingale_value(&sq, p(0.1)) - hand).abs() < 1e-14);
        assert!(verify_step_supermartingale(&sq, p(0.1)));
        // above the mixability constant a grid search finds a violation
        let violated = (0..=100).any(|i| {
            (0..=100).any(|j| {
                let illegal = ExpertAdvice::predict(p(i as f64 / 100.0), 2.5, LossSpec::Square);
                !verify_step_supermartingale(&illegal, p(j as f64 / 100.0))
            })
        });
        assert!(violated);
    }

    #[test]
    fn forecaster_keeps_mixture_below_one() {
        let mut df = DefensiveForecaster::new(3);
        let outcomes = [1, 0, 0, 1, 1, 1, 0, 1, 0, 0];
        for (t, &o) in outcomes.iter().enumerate() {
            let shift = t as f64 * 0.05;
            let advice = [
                ExpertAdvice::predict(p(0.1 + shift), 1.0, LossSpec::Log),
                ExpertAdvice::predict(p(0.9 - shift), 2.0, LossSpec::Square),
                ExpertAdvice::predict(p(0.5), 0.5, LossSpec::GeneralizedLog { eta: 0.5 }),
            ];
            let before = df.state().mixture();
            let d = df.predict(&advice).unwrap();
            df.observe(&advice, d.prediction, Outcome::from_bit(o).unwrap()).unwrap();
            assert!(df.state().mixture() <= before + STEP_TOL);
        }
        for &lq in df.state().log_values() {
            assert!(lq <= ln(3.0) + 1e-9);
        }
    }
}
