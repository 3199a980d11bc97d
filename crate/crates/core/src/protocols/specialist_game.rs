//! The specialist protocol, played by [`SpecialistState`].

use alloc::format;
use alloc::vec::Vec;

use super::{checked_advice, ExpertPanel, GameRecord, OutcomeSource, ProtocolError, RegretLedger, Step, Transcript};
use crate::engine::{Advice, ExpertAdvice};
use crate::loss::{Outcome, Prediction};
use crate::specialist::{SpecialistConfig, SpecialistError, SpecialistState};

/// Slack on the per-step requirement `Σ u^n e^{η(λ(π,ω) − λ(γ^n,ω))} ≤ 1`.
const STEP_TOL: f64 = 1e-9;

/// Plays `horizon` rounds. Only the experts' predictions or abstentions are
/// used; the loss and rate of `cfg` replace whatever the panel announces.
///
/// The ledger bound of expert `n` is `−ln p^n / η` over its awake steps.
pub fn run_specialist_game<P, R>(
    cfg: &SpecialistConfig,
    panel: &mut P,
    reality: &mut R,
    horizon: usize,
) -> Result<GameRecord, ProtocolError>
where
    P: ExpertPanel + ?Sized,
    R: OutcomeSource + ?Sized,
{
    if panel.n_experts() != cfg.n_experts() {
        return Err(SpecialistError::LengthMismatch { expected: cfg.n_experts(), got: panel.n_experts() }.into());
    }
    let mut state = SpecialistState::new(cfg);
    let mut transcript = Transcript::with_priors(cfg.priors().to_vec());
    let mut ledger = RegretLedger::new(panel.labels(), Some(cfg.priors()));
    for t in 1..=horizon {
        let moves: Vec<Advice> = checked_advice(panel, t, &transcript)?.into_iter().map(|a| a.advice).collect();
        let prediction = state.predict(cfg, &moves)?;
        for omega in Outcome::BOTH {
            let req = state.step_requirement(cfg, &moves, prediction, omega)?;
            if req.is_nan() || req > 1.0 + STEP_TOL {
                return Err(SpecialistError::InvariantViolation(format!(
                    "step {t}: weighted factor {req} exceeds 1 for outcome {}",
                    omega.bit()
                ))
                .into());
            }
        }
        let outcome = reality
            .next_outcome(t, &transcript, prediction)
            .map_err(|reason| ProtocolError::InvalidOutcome { step: t, reason })?;
        state.update(cfg, &moves, prediction, outcome)?;
        let advice: Vec<ExpertAdvice> =
            moves.into_iter().map(|advice| ExpertAdvice { advice, eta: cfg.eta(), loss: cfg.loss().clone() }).collect();
        ledger.record(&advice, prediction, outcome);
        transcript.push(Step { advice, prediction, outcome });
    }
    Ok(GameRecord { transcript, ledger })
}

struct Streams<'a> {
    advice: &'a [Vec<Advice>],
    cfg: &'a SpecialistConfig,
}

impl ExpertPanel for Streams<'_> {
    fn n_experts(&self) -> usize {
        self.cfg.n_experts()
    }

    fn labels(&self) -> Vec<alloc::string::String> {
        (0..self.n_experts()).map(|n| format!("specialist#{n}")).collect()
    }

    fn advise(&mut self, t: usize, _: &Transcript) -> Result<Vec<ExpertAdvice>, ProtocolError> {
        let row = &self.advice[t - 1];
        Ok(row.iter().map(|&advice| ExpertAdvice { advice, eta: self.cfg.eta(), loss: self.cfg.loss().clone() }).collect())
    }
}

struct Replay<'a>(&'a [Outcome]);

impl OutcomeSource for Replay<'_> {
    fn next_outcome(&mut self, t: usize, _: &Transcript, _: Prediction) -> Result<Outcome, alloc::string::String> {
        Ok(self.0[t - 1])
    }
}

/// Runs the algorithm over fixed advice and outcome streams of equal length.
pub fn run_specialist_streams(
    cfg: &SpecialistConfig,
    advice: &[Vec<Advice>],
    outcomes: &[Outcome],
) -> Result<GameRecord, ProtocolError> {
    if advice.len() != outcomes.len() {
        return Err(ProtocolError::StreamLengthMismatch { advice: advice.len(), outcomes: outcomes.len() });
    }
    run_specialist_game(cfg, &mut Streams { advice, cfg }, &mut Replay(outcomes), outcomes.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossSpec;
    use crate::protocols::{verify_transcript, Tolerances};
    use alloc::vec;

    #[test]
    fn single_expert_has_zero_regret_bound() {
        let cfg = SpecialistConfig::new(LossSpec::Log, 1.0, vec![1.0]).unwrap();
        let g = Advice::Predict(Prediction::new(0.3).unwrap());
        let outcomes: Vec<Outcome> = (0..50).map(|t| if t % 3 == 0 { Outcome::One } else { Outcome::Zero }).collect();
        let record = run_specialist_streams(&cfg, &vec![vec![g]; 50], &outcomes).unwrap();
        let report = record.ledger.report(1e-6);
        assert!(report.all_pass);
        assert!(report.rows[0].regret.abs() < 1e-12);
        assert!(verify_transcript(&record.transcript, Tolerances::default()).unwrap().passed());
    }

    #[test]
    fn mismatched_streams_are_rejected() {
        let cfg = SpecialistConfig::uniform(LossSpec::Log, 1.0, 2).unwrap();
        assert!(matches!(
            run_specialist_streams(&cfg, &[vec![Advice::Abstain; 2]], &[]),
            Err(ProtocolError::StreamLengthMismatch { advice: 1, outcomes: 0 })
        ));
        assert!(run_specialist_streams(&cfg, &[vec![Advice::Abstain; 3]], &[Outcome::One]).is_err());
    }
}
