//! Specialist experts and the Aggregating Algorithm.
//!
//! Each expert starts with a prior weight `p^n`. At every step only the
//! awake experts take part: their weights are normalised among themselves,
//! the substitution function turns the weighted predictions into the
//! learner's prediction, and after the outcome each awake weight is
//! multiplied by `e^{η(λ(π,ω) − λ(γ^n,ω))}`. Sleeping experts keep their
//! weight. When nobody ever sleeps this is the Aggregating Algorithm.
//!
//! The learner's loss is the benchmark: an awake expert who did better than
//! the learner gains weight, one who did worse loses it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::Advice;
use crate::loss::{substitution, LossError, LossFunction, LossSpec, Outcome, Prediction};
use crate::math::{exp, ln, log_sum_exp, loss_diff, normalize_log_weights};

pub use crate::protocols::specialist_game::{run_specialist_game, run_specialist_streams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecialistError {
    #[error("invalid specialist configuration: {0}")]
    Config(String),
    #[error("expected advice from {expected} experts, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

/// Loss, learning rate and prior weights of a specialist game.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialistConfig {
    loss: LossSpec,
    eta: f64,
    priors: Vec<f64>,
}

impl SpecialistConfig {
    pub fn new(loss: LossSpec, eta: f64, priors: Vec<f64>) -> Result<Self, SpecialistError> {
        let bad = |msg: String| Err(SpecialistError::Config(msg));
        loss.validate()?;
        if !loss.is_proper() {
            return bad(format!("loss {loss} is not proper"));
        }
        let eta_max = loss.mixability_constant()?;
        if !(eta.is_finite() && eta > 0.0) || eta > eta_max * (1.0 + 1e-12) {
            return bad(format!("learning rate {eta} must lie in (0, {eta_max}] for loss {loss}"));
        }
        if priors.is_empty() {
            return bad(String::from("at least one expert is required"));
        }
        if let Some(p) = priors.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return bad(format!("prior {p} is not positive"));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("priors sum to {total}, not 1"));
        }
        Ok(SpecialistConfig { loss, eta, priors })
    }

    /// Uniform priors `1/N`.
    pub fn uniform(loss: LossSpec, eta: f64, n_experts: usize) -> Result<Self, SpecialistError> {
        let priors = alloc::vec![1.0 / n_experts as f64; n_experts];
        // 1/N summed N times can miss 1 by a few ulps
        let total: f64 = priors.iter().sum();
        let priors = priors.into_iter().map(|p| p / total).collect();
        Self::new(loss, eta, priors)
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn n_experts(&self) -> usize {
        self.priors.len()
    }

    /// Regret bound `−ln p^n / η` against expert `n`.
    pub fn bound(&self, n: usize) -> f64 {
        -ln(self.priors[n]) / self.eta
    }
}

/// Log-weights `ln w^n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialistState {
    log_w: Vec<f64>,
    step: usize,
}

impl SpecialistState {
    /// `w^n_0 = p^n`.
    pub fn new(cfg: &SpecialistConfig) -> Self {
        SpecialistState { log_w: cfg.priors.iter().map(|&p| ln(p)).collect(), step: 0 }
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `ln Σ_n w^n`; never increases under this algorithm.
    pub fn log_total_weight(&self) -> f64 {
        log_sum_exp(&self.log_w)
    }

    fn check_len(&self, advice: &[Advice]) -> Result<(), SpecialistError> {
        if advice.len() == self.log_w.len() {
            Ok(())
        } else {
            Err(SpecialistError::LengthMismatch { expected: self.log_w.len(), got: advice.len() })
        }
    }

    /// Normalised weights `u^n` of the awake experts and their predictions.
    pub fn awake_mixture(&self, advice: &[Advice]) -> Result<(Vec<f64>, Vec<Prediction>), SpecialistError> {
        self.check_len(advice)?;
        let (log_w, preds): (Vec<f64>, Vec<Prediction>) = advice
            .iter()
            .zip(&self.log_w)
            .filter_map(|(a, &lw)| a.prediction().map(|g| (lw, g)))
            .unzip();
        Ok((normalize_log_weights(&log_w), preds))
    }

    /// The learner's prediction for this step.
    pub fn predict(&self, cfg: &SpecialistConfig, advice: &[Advice]) -> Result<Prediction, SpecialistError> {
        let (weights, preds) = self.awake_mixture(advice)?;
        Ok(substitution(&cfg.loss, cfg.eta, &weights, &preds)?)
    }

    /// `Σ_{n awake} u^n·e^{η(λ(π,ω) − λ(γ^n,ω))}`; at most 1 when `π` came
    /// from [`SpecialistState::predict`].
    pub fn step_requirement(
        &self,
        cfg: &SpecialistConfig,
        advice: &[Advice],
        pi: Prediction,
        omega: Outcome,
    ) -> Result<f64, SpecialistError> {
        let (weights, preds) = self.awake_mixture(advice)?;
        let own = cfg.loss.evaluate(pi, omega);
        Ok(weights
            .iter()
            .zip(&preds)
            .filter(|(u, _)| **u > 0.0)
            .map(|(u, &g)| u * exp(cfg.eta * loss_diff(own, cfg.loss.evaluate(g, omega))))
            .sum())
    }

    /// Multiplies the awake weights by their step factors.
    pub fn update(
        &mut self,
        cfg: &SpecialistConfig,
        advice: &[Advice],
        pi: Prediction,
        omega: Outcome,
    ) -> Result<(), SpecialistError> {
        self.check_len(advice)?;
        let own = cfg.loss.evaluate(pi, omega);
        let mut next = self.log_w.clone();
        for (n, (lw, a)) in next.iter_mut().zip(advice).enumerate() {
            let Some(g) = a.prediction() else { continue };
            if *lw == f64::NEG_INFINITY {
                continue;
            }
            let d = loss_diff(own, cfg.loss.evaluate(g, omega));
            if d == f64::INFINITY {
                return Err(SpecialistError::InvariantViolation(format!(
                    "learner loss is infinite where expert {n} is finite on step {}",
                    self.step + 1
                )));
            }
            if d != 0.0 {
                *lw += cfg.eta * d;
            }
        }
        self.log_w = next;
        self.step += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EvaluatorState;
    use crate::engine::ExpertAdvice;

    fn p(x: f64) -> Prediction {
        Prediction::new(x).unwrap()
    }

    fn awake(g: f64) -> Advice {
        Advice::Predict(p(g))
    }

    #[test]
    fn config_validation() {
        assert!(SpecialistConfig::new(LossSpec::Square, 2.0, alloc::vec![0.5, 0.5]).is_ok());
        assert!(SpecialistConfig::new(LossSpec::Square, 2.1, alloc::vec![0.5, 0.5]).is_err());
        assert!(SpecialistConfig::new(LossSpec::Log, 1.0, alloc::vec![0.5, 0.4]).is_err());
        assert!(SpecialistConfig::new(LossSpec::Log, 1.0, alloc::vec![1.0, 0.0]).is_err());
        assert!(SpecialistConfig::new(LossSpec::Log, 1.0, alloc::vec![]).is_err());
        let cfg = SpecialistConfig::uniform(LossSpec::Log, 1.0, 3).unwrap();
        assert!((cfg.bound(0) - ln(3.0)).abs() < 1e-12);
    }

    #[test]
    fn predictions() {
        let cfg = SpecialistConfig::uniform(LossSpec::Log, 1.0, 2).unwrap();
        let state = SpecialistState::new(&cfg);
        let pi = state.predict(&cfg, &[awake(0.2), awake(0.6)]).unwrap();
        assert!((pi.get() - 0.4).abs() < 1e-11);
        let engine = EvaluatorState::new(2)
            .choose_prediction(&[
                ExpertAdvice::predict(p(0.2), 1.0, LossSpec::Log),
                ExpertAdvice::predict(p(0.6), 1.0, LossSpec::Log),
            ])
            .unwrap();
        assert!((pi.get() - engine.prediction.get()).abs() < 1e-9);

        let cfg3 = SpecialistConfig::uniform(LossSpec::Log, 1.0, 3).unwrap();
        let s3 = SpecialistState::new(&cfg3);
        assert_eq!(s3.predict(&cfg3, &[Advice::Abstain, awake(0.7), Advice::Abstain]).unwrap(), p(0.7));
        assert_eq!(s3.predict(&cfg3, &[Advice::Abstain; 3]).unwrap(), Prediction::HALF);

        let sq = SpecialistConfig::uniform(LossSpec::Square, 2.0, 2).unwrap();
        let pi = SpecialistState::new(&sq).predict(&sq, &[awake(0.0), awake(1.0)]).unwrap();
        assert!((pi.get() - 0.5).abs() < 1e-11);
        assert!(matches!(
            SpecialistState::new(&sq).predict(&sq, &[awake(0.0)]),
            Err(SpecialistError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn updates_touch_only_awake_experts() {
        let cfg = SpecialistConfig::uniform(LossSpec::Log, 1.0, 3).unwrap();
        let mut state = SpecialistState::new(&cfg);
        let before = state.log_weights().to_vec();
        let advice = [awake(0.8), Advice::Abstain, awake(0.5)];
        state.update(&cfg, &advice, p(0.5), Outcome::One).unwrap();
        let after = state.log_weights();
        assert!((after[0] - before[0] - ln(1.6)).abs() < 1e-14);
        assert_eq!(after[1], before[1]);
        assert_eq!(after[2], before[2]);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn prediction_meets_step_requirement() {
        let cfg = SpecialistConfig::new(LossSpec::Square, 2.0, alloc::vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut state = SpecialistState::new(&cfg);
        let rounds = [
            [awake(0.1), awake(0.9), Advice::Abstain, awake(0.4)],
            [Advice::Abstain, awake(0.2), awake(0.3), awake(1.0)],
            [awake(0.0), Advice::Abstain, Advice::Abstain, awake(0.7)],
        ];
        for (t, advice) in rounds.iter().enumerate() {
            let pi = state.predict(&cfg, advice).unwrap();
            for omega in Outcome::BOTH {
                assert!(state.step_requirement(&cfg, advice, pi, omega).unwrap() <= 1.0 + 1e-9);
            }
            let before = state.log_total_weight();
            state.update(&cfg, advice, pi, if t % 2 == 0 { Outcome::One } else { Outcome::Zero }).unwrap();
            assert!(state.log_total_weight() <= before + 1e-12);
        }
    }
}
