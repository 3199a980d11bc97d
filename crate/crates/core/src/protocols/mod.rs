//! Game runners and regret accounting.
//!
//! Every protocol is driven through one loop: the experts' panel announces
//! advice, the learner predicts, reality answers having seen the
//! prediction, and the [`RegretLedger`] books the step. The protocols differ
//! only in the panel:
//!
//! * evaluator game: each expert brings its own loss and learning rate,
//! * constant evaluators: expert `n` is tied to a fixed `(λ^n, η^n)`,
//! * multiobjective: expert `n` is replayed once per loss `λ^m`,
//! * bipartite: expert `n` is replayed for each loss it is related to,
//! * standard: every expert is judged by one loss,
//! * specialist: experts may abstain and the learner plays the explicit
//!   algorithm of [`crate::specialist`].

use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::{DefensiveForecaster, EngineError, ExpertAdvice};
use crate::loss::{LossError, Outcome, Prediction};
use crate::specialist::SpecialistError;

mod ledger;
mod panel;
pub mod specialist_game;
mod verify;

pub use ledger::{LedgerReport, LedgerRow, RegretLedger, ReportRow, BOUND_TOL};
pub use panel::{bipartite_wrap, multiobjective_wrap, BipartiteRelation, Evaluator, VirtualPanel};
pub use verify::{verify_transcript, Tolerances, VerifyReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("step {step}: expert {expert}: {reason}")]
    InvalidAdvice { step: usize, expert: usize, reason: String },
    #[error("step {step}: expected {expected} advice entries, got {got}")]
    AdviceCount { step: usize, expected: usize, got: usize },
    #[error("step {step}: reality: {reason}")]
    InvalidOutcome { step: usize, reason: String },
    #[error("invalid relation: {0}")]
    InvalidRelation(String),
    #[error("{advice} advice steps but {outcomes} outcomes")]
    StreamLengthMismatch { advice: usize, outcomes: usize },
    #[error("invalid transcript at step {step}: {reason}")]
    InvalidTranscript { step: usize, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Specialist(#[from] SpecialistError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// One round: the advice vector, the learner's prediction and the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub advice: Vec<ExpertAdvice>,
    pub prediction: Prediction,
    pub outcome: Outcome,
}

/// The history of a game.
///
/// `priors` is `None` for the uniform mixture the defensive forecaster
/// uses, and carries `p^n` for specialist games.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub priors: Option<Vec<f64>>,
    pub steps: Vec<Step>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn with_priors(priors: Vec<f64>) -> Self {
        Transcript { priors: Some(priors), steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of experts, taken from the first step.
    pub fn n_experts(&self) -> Option<usize> {
        self.steps.first().map(|s| s.advice.len()).or_else(|| self.priors.as_ref().map(Vec::len))
    }

    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
    }
}

/// A single expert's strategy.
pub trait AdviceSource {
    /// Advice for step `t` (1-based) given the history so far.
    fn next_advice(&mut self, t: usize, history: &Transcript) -> Result<ExpertAdvice, String>;

    fn label(&self) -> String {
        String::from("expert")
    }
}

/// Reality's strategy. It sees the learner's prediction before moving.
pub trait OutcomeSource {
    fn next_outcome(&mut self, t: usize, history: &Transcript, prediction: Prediction) -> Result<Outcome, String>;
}

impl<R: OutcomeSource + ?Sized> OutcomeSource for &mut R {
    fn next_outcome(&mut self, t: usize, history: &Transcript, prediction: Prediction) -> Result<Outcome, String> {
        (**self).next_outcome(t, history, prediction)
    }
}

/// The set of experts taking part in a game, producing one advice vector
/// per step.
pub trait ExpertPanel {
    fn n_experts(&self) -> usize;

    fn labels(&self) -> Vec<String>;

    fn advise(&mut self, t: usize, history: &Transcript) -> Result<Vec<ExpertAdvice>, ProtocolError>;
}

impl<S: AdviceSource> ExpertPanel for Vec<S> {
    fn n_experts(&self) -> usize {
        self.len()
    }

    fn labels(&self) -> Vec<String> {
        self.iter().enumerate().map(|(n, s)| alloc::format!("{}#{n}", s.label())).collect()
    }

    fn advise(&mut self, t: usize, history: &Transcript) -> Result<Vec<ExpertAdvice>, ProtocolError> {
        self.iter_mut()
            .enumerate()
            .map(|(expert, s)| {
                s.next_advice(t, history).map_err(|reason| ProtocolError::InvalidAdvice { step: t, expert, reason })
            })
            .collect()
    }
}

impl<P: ExpertPanel + ?Sized> ExpertPanel for &mut P {
    fn n_experts(&self) -> usize {
        (**self).n_experts()
    }

    fn labels(&self) -> Vec<String> {
        (**self).labels()
    }

    fn advise(&mut self, t: usize, history: &Transcript) -> Result<Vec<ExpertAdvice>, ProtocolError> {
        (**self).advise(t, history)
    }
}

/// How the learner chooses its predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Learner {
    DefensiveForecasting,
    /// Always the same prediction; a baseline that carries no guarantee.
    Fixed(Prediction),
}

/// A finished game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub transcript: Transcript,
    pub ledger: RegretLedger,
}

fn checked_advice<P: ExpertPanel + ?Sized>(
    panel: &mut P,
    t: usize,
    history: &Transcript,
) -> Result<Vec<ExpertAdvice>, ProtocolError> {
    let advice = panel.advise(t, history)?;
    if advice.len() != panel.n_experts() {
        return Err(ProtocolError::AdviceCount { step: t, expected: panel.n_experts(), got: advice.len() });
    }
    for (expert, a) in advice.iter().enumerate() {
        a.validate().map_err(|reason| ProtocolError::InvalidAdvice { step: t, expert, reason })?;
    }
    Ok(advice)
}

/// Plays `horizon` rounds of the evaluator protocol with the given learner.
pub fn run_game<P, R>(panel: &mut P, reality: &mut R, horizon: usize, learner: Learner) -> Result<GameRecord, ProtocolError>
where
    P: ExpertPanel + ?Sized,
    R: OutcomeSource + ?Sized,
{
    let n = panel.n_experts();
    let mut forecaster = DefensiveForecaster::new(n);
    let mut transcript = Transcript::new();
    let mut ledger = RegretLedger::new(panel.labels(), None);
    for t in 1..=horizon {
        let advice = checked_advice(panel, t, &transcript)?;
        let prediction = match learner {
            Learner::DefensiveForecasting => forecaster.predict(&advice)?.prediction,
            Learner::Fixed(p) => p,
        };
        let outcome = reality
            .next_outcome(t, &transcript, prediction)
            .map_err(|reason| ProtocolError::InvalidOutcome { step: t, reason })?;
        if learner == Learner::DefensiveForecasting {
            forecaster.observe(&advice, prediction, outcome)?;
        }
        ledger.record(&advice, prediction, outcome);
        transcript.push(Step { advice, prediction, outcome });
    }
    Ok(GameRecord { transcript, ledger })
}

/// The general game: every expert announces its own loss and learning rate
/// each step. Defensive forecasting keeps
/// `Σ_t η^n_t(λ^n_t(π_t,ω_t) − λ^n_t(γ^n_t,ω_t)) ≤ ln N` for every expert.
pub fn run_evaluator_game<P, R>(panel: &mut P, reality: &mut R, horizon: usize) -> Result<GameRecord, ProtocolError>
where
    P: ExpertPanel + ?Sized,
    R: OutcomeSource + ?Sized,
{
    run_game(panel, reality, horizon, Learner::DefensiveForecasting)
}

/// Expert `n` is tied to `evaluators[n]` for the whole game; the ledger
/// bound is `L^{(n)}_T ≤ L^n_T + ln N / η^n`.
pub fn run_constant_evaluator_game<P, R>(
    evaluators: Vec<Evaluator>,
    base: P,
    reality: &mut R,
    horizon: usize,
) -> Result<GameRecord, ProtocolError>
where
    P: ExpertPanel,
    R: OutcomeSource + ?Sized,
{
    let mut panel = VirtualPanel::constant(base, evaluators)?;
    run_evaluator_game(&mut panel, reality, horizon)
}

/// Every expert is judged by the single loss `λ` at rate `η`; the ledger's
/// `standard_learner_loss` is the learner's `L_T` and the bound reads
/// `L_T ≤ L^n_T + ln N / η`.
pub fn run_standard_game<P, R>(
    evaluator: Evaluator,
    base: P,
    reality: &mut R,
    horizon: usize,
) -> Result<GameRecord, ProtocolError>
where
    P: ExpertPanel,
    R: OutcomeSource + ?Sized,
{
    let n = base.n_experts();
    run_constant_evaluator_game(alloc::vec![evaluator; n], base, reality, horizon)
}
