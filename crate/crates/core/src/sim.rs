//! Expert and reality strategies for driving the protocols.
//!
//! Randomness is ChaCha8 and stateless: the draw for step `t` comes from
//! the generator seeded with the run seed, on the strategy's stream, at
//! word position `2t`. Runs are therefore bit-identical across platforms
//! and independent of the order in which strategies are queried.
//!
//! Text forms (as used in config files):
//!
//! ```text
//! expert   := kind [ "@" loss [ ":eta=" η ] ] [ ":seed=" s ]
//! kind     := "constant:" γ | "uniform" | "drift:" start ":" rate
//!           | "script:" γ,γ,… [ ":cycle" ] | "sleeper:" pattern "(" kind ")"
//! pattern  := "always" | "even" | "odd" | "every:" period ":" phase
//!           | "bernoulli:" p ":" seed
//! reality  := "bernoulli:" p [ ":" seed ] | "script:" ω,ω,… [ ":cycle" ] | "greedy:" loss
//! ```
//!
//! The learning rate defaults to the loss's mixability constant and the
//! loss to `log`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Advice, ExpertAdvice};
use crate::loss::{LossFunction, LossSpec, Outcome, Prediction};
use crate::protocols::{AdviceSource, OutcomeSource, Transcript};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid strategy `{text}`: {reason}")]
pub struct StrategyError {
    pub text: String,
    pub reason: String,
}

fn err<T>(text: &str, reason: impl Into<String>) -> Result<T, StrategyError> {
    Err(StrategyError { text: String::from(text), reason: reason.into() })
}

/// A uniform draw in `[0,1)` for step `t` on `stream`.
pub fn uniform_draw(run_seed: u64, stream: u64, t: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * t as u128);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// When a sleeper is awake.
#[derive(Debug, Clone, PartialEq)]
pub enum AwakePattern {
    Always,
    /// Awake at even `t`.
    Even,
    /// Awake at odd `t`.
    Odd,
    /// Awake when `t mod period = phase`.
    Periodic { period: usize, phase: usize },
    /// Awake with probability `p`, independently per step.
    Bernoulli { p: f64, seed: u64 },
}

impl AwakePattern {
    pub fn is_awake(&self, run_seed: u64, t: usize) -> bool {
        match *self {
            AwakePattern::Always => true,
            AwakePattern::Even => t.is_multiple_of(2),
            AwakePattern::Odd => t % 2 == 1,
            AwakePattern::Periodic { period, phase } => t % period == phase,
            AwakePattern::Bernoulli { p, seed } => uniform_draw(run_seed, seed, t) < p,
        }
    }
}

impl fmt::Display for AwakePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AwakePattern::Always => write!(f, "always"),
            AwakePattern::Even => write!(f, "even"),
            AwakePattern::Odd => write!(f, "odd"),
            AwakePattern::Periodic { period, phase } => write!(f, "every:{period}:{phase}"),
            AwakePattern::Bernoulli { p, seed } => write!(f, "bernoulli:{p}:{seed}"),
        }
    }
}

impl FromStr for AwakePattern {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, StrategyError> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["always"] => Ok(AwakePattern::Always),
            ["even"] => Ok(AwakePattern::Even),
            ["odd"] => Ok(AwakePattern::Odd),
            ["every", period, phase] => {
                let period: usize = parse_num(s, period)?;
                let phase: usize = parse_num(s, phase)?;
                if period == 0 || phase >= period {
                    return err(s, "need 0 <= phase < period");
                }
                Ok(AwakePattern::Periodic { period, phase })
            }
            ["bernoulli", p, seed] => {
                let p = parse_unit(s, p)?;
                Ok(AwakePattern::Bernoulli { p, seed: parse_num(s, seed)? })
            }
            _ => err(s, "unknown awake pattern"),
        }
    }
}

/// How an expert picks its predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpertKind {
    Constant(Prediction),
    /// Independent uniform predictions.
    IidUniform,
    /// `start + rate·(t−1)`, reflected back into `[0,1]` at the ends.
    Drift { start: f64, rate: f64 },
    /// The listed predictions in order; with `cycle` the list repeats,
    /// otherwise running past its end is an error.
    Scripted { values: Vec<Prediction>, cycle: bool },
    /// `base`'s prediction while awake, abstention otherwise.
    Sleeper { base: Box<ExpertKind>, pattern: AwakePattern },
}

/// Folds `x` into `[0,1]` as if bouncing between the walls.
fn reflect(x: f64) -> f64 {
    let r = x - 2.0 * libm::floor(x / 2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

impl ExpertKind {
    fn advice(&self, run_seed: u64, stream: u64, t: usize) -> Result<Advice, String> {
        Ok(match self {
            ExpertKind::Constant(g) => Advice::Predict(*g),
            ExpertKind::IidUniform => Advice::Predict(Prediction::clamped(uniform_draw(run_seed, stream, t))),
            ExpertKind::Drift { start, rate } => {
                Advice::Predict(Prediction::clamped(reflect(start + rate * (t - 1) as f64)))
            }
            ExpertKind::Scripted { values, cycle } => {
                let i = t - 1;
                match values.get(i) {
                    Some(g) => Advice::Predict(*g),
                    None if *cycle => Advice::Predict(values[i % values.len()]),
                    None => return Err(format!("script of length {} exhausted at step {t}", values.len())),
                }
            }
            ExpertKind::Sleeper { base, pattern } => {
                if pattern.is_awake(run_seed, t) {
                    base.advice(run_seed, stream, t)?
                } else {
                    Advice::Abstain
                }
            }
        })
    }
}

impl fmt::Display for ExpertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpertKind::Constant(g) => write!(f, "constant:{g}"),
            ExpertKind::IidUniform => write!(f, "uniform"),
            ExpertKind::Drift { start, rate } => write!(f, "drift:{start}:{rate}"),
            ExpertKind::Scripted { values, cycle } => {
                write!(f, "script:")?;
                for (i, v) in values.iter().enumerate() {
                    write!(f, "{}{v}", if i == 0 { "" } else { "," })?;
                }
                if *cycle {
                    write!(f, ":cycle")?;
                }
                Ok(())
            }
            ExpertKind::Sleeper { base, pattern } => write!(f, "sleeper:{pattern}({base})"),
        }
    }
}

fn parse_num<T: FromStr>(whole: &str, s: &str) -> Result<T, StrategyError> {
    s.trim().parse().or_else(|_| err(whole, format!("`{s}` is not a valid number")))
}

fn parse_unit(whole: &str, s: &str) -> Result<f64, StrategyError> {
    let x: f64 = parse_num(whole, s)?;
    if !(0.0..=1.0).contains(&x) {
        return err(whole, format!("{x} is outside [0,1]"));
    }
    Ok(x)
}

fn parse_script<T>(whole: &str, body: &str, item: impl Fn(&str) -> Result<T, StrategyError>) -> Result<(Vec<T>, bool), StrategyError> {
    let (list, cycle) = match body.strip_suffix(":cycle") {
        Some(list) => (list, true),
        None => (body, false),
    };
    let values = list.split(',').map(|x| item(x.trim())).collect::<Result<Vec<T>, _>>()?;
    if values.is_empty() || list.trim().is_empty() {
        return err(whole, "empty script");
    }
    Ok((values, cycle))
}

impl FromStr for ExpertKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, StrategyError> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(ExpertKind::IidUniform);
        }
        if let Some(rest) = s.strip_prefix("constant:") {
            return Ok(ExpertKind::Constant(Prediction::clamped(parse_unit(s, rest)?)));
        }
        if let Some(rest) = s.strip_prefix("drift:") {
            let Some((start, rate)) = rest.split_once(':') else { return err(s, "expected drift:<start>:<rate>") };
            let rate: f64 = parse_num(s, rate)?;
            if !rate.is_finite() {
                return err(s, "rate must be finite");
            }
            return Ok(ExpertKind::Drift { start: parse_unit(s, start)?, rate });
        }
        if let Some(rest) = s.strip_prefix("script:") {
            let (values, cycle) = parse_script(s, rest, |x| parse_unit(s, x).map(Prediction::clamped))?;
            return Ok(ExpertKind::Scripted { values, cycle });
        }
        if let Some(rest) = s.strip_prefix("sleeper:") {
            let Some(open) = rest.find('(') else { return err(s, "expected sleeper:<pattern>(<kind>)") };
            let Some(inner) = rest[open + 1..].strip_suffix(')') else { return err(s, "unbalanced parentheses") };
            let pattern = rest[..open].parse()?;
            return Ok(ExpertKind::Sleeper { base: Box::new(inner.parse()?), pattern });
        }
        err(s, "unknown expert kind")
    }
}

/// A simulated expert: a prediction rule plus the loss and learning rate it
/// announces every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertStrategy {
    pub kind: ExpertKind,
    pub loss: LossSpec,
    pub eta: f64,
    /// Random stream of this expert.
    pub seed: u64,
    run_seed: u64,
    explicit_eta: bool,
}

impl ExpertStrategy {
    /// Validates `0 < η ≤ η_max(loss)`.
    pub fn new(kind: ExpertKind, loss: LossSpec, eta: f64) -> Result<Self, StrategyError> {
        let s = ExpertStrategy { kind, loss, eta, seed: 0, run_seed: 0, explicit_eta: true };
        s.probe().validate().or_else(|reason| err(&s.to_string(), reason))?;
        Ok(s)
    }

    /// Rate set to the loss's mixability constant.
    pub fn at_mixability_constant(kind: ExpertKind, loss: LossSpec) -> Result<Self, StrategyError> {
        let eta = loss.mixability_constant().or_else(|e| err(&loss.id(), e.to_string()))?;
        let mut s = Self::new(kind, loss, eta)?;
        s.explicit_eta = false;
        Ok(s)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Re-keys every random draw by the run seed of a seed sweep.
    pub fn with_run_seed(mut self, run_seed: u64) -> Self {
        self.run_seed = run_seed;
        self
    }

    fn probe(&self) -> ExpertAdvice {
        ExpertAdvice::abstain(self.eta, self.loss.clone())
    }
}

impl AdviceSource for ExpertStrategy {
    fn next_advice(&mut self, t: usize, _: &Transcript) -> Result<ExpertAdvice, String> {
        let advice = self.kind.advice(self.run_seed, self.seed, t)?;
        Ok(ExpertAdvice { advice, eta: self.eta, loss: self.loss.clone() })
    }

    fn label(&self) -> String {
        format!("{}@{}", self.kind, self.loss)
    }
}

impl fmt::Display for ExpertStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.loss)?;
        if self.explicit_eta {
            write!(f, ":eta={}", self.eta)?;
        }
        if self.seed != 0 {
            write!(f, ":seed={}", self.seed)?;
        }
        Ok(())
    }
}

impl FromStr for ExpertStrategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, StrategyError> {
        let (kind, rest) = match s.rsplit_once('@') {
            // `@` never occurs inside a kind
            Some((kind, rest)) if !kind.contains('@') => (kind, rest),
            Some(_) => return err(s, "more than one `@`"),
            None => (s, "log"),
        };
        let kind: ExpertKind = kind.parse()?;
        let mut loss_text = rest.trim();
        let mut eta = None;
        let mut seed = 0;
        loop {
            if let Some((head, v)) = loss_text.rsplit_once(":seed=") {
                seed = parse_num(s, v)?;
                loss_text = head;
            } else if let Some((head, v)) = loss_text.rsplit_once(":eta=") {
                eta = Some(parse_num::<f64>(s, v)?);
                loss_text = head;
            } else {
                break;
            }
        }
        let loss: LossSpec = loss_text.parse().or_else(|e: crate::loss::LossError| err(s, e.to_string()))?;
        let strategy = match eta {
            Some(eta) => ExpertStrategy::new(kind, loss, eta),
            None => ExpertStrategy::at_mixability_constant(kind, loss),
        };
        strategy.map(|x| x.with_seed(seed)).map_err(|e| StrategyError { text: String::from(s), reason: e.reason })
    }
}

/// How reality picks outcomes.
#[derive(Debug, Clone, PartialEq)]
pub enum RealityStrategy {
    /// `ω = 1` with probability `p`.
    Bernoulli { p: f64, seed: u64 },
    Scripted { values: Vec<Outcome>, cycle: bool },
    /// The outcome that maximises the learner's loss under `target`; ties
    /// go to `ω = 1`.
    GreedyAdversary(LossSpec),
}

/// A reality strategy bound to the run seed of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Reality {
    pub strategy: RealityStrategy,
    pub run_seed: u64,
}

impl RealityStrategy {
    pub fn with_run_seed(self, run_seed: u64) -> Reality {
        Reality { strategy: self, run_seed }
    }

    pub fn outcome(&self, run_seed: u64, t: usize, prediction: Prediction) -> Result<Outcome, String> {
        match self {
            RealityStrategy::Bernoulli { p, seed } => {
                Ok(if uniform_draw(run_seed, *seed, t) < *p { Outcome::One } else { Outcome::Zero })
            }
            RealityStrategy::Scripted { values, cycle } => match values.get(t - 1) {
                Some(w) => Ok(*w),
                None if *cycle => Ok(values[(t - 1) % values.len()]),
                None => Err(format!("outcome script of length {} exhausted at step {t}", values.len())),
            },
            RealityStrategy::GreedyAdversary(target) => {
                let zero = target.evaluate(prediction, Outcome::Zero);
                let one = target.evaluate(prediction, Outcome::One);
                Ok(if zero > one { Outcome::Zero } else { Outcome::One })
            }
        }
    }
}

impl OutcomeSource for RealityStrategy {
    fn next_outcome(&mut self, t: usize, _: &Transcript, prediction: Prediction) -> Result<Outcome, String> {
        self.outcome(0, t, prediction)
    }
}

impl OutcomeSource for Reality {
    fn next_outcome(&mut self, t: usize, _: &Transcript, prediction: Prediction) -> Result<Outcome, String> {
        self.strategy.outcome(self.run_seed, t, prediction)
    }
}

impl fmt::Display for RealityStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealityStrategy::Bernoulli { p, seed } => write!(f, "bernoulli:{p}:{seed}"),
            RealityStrategy::Scripted { values, cycle } => {
                write!(f, "script:")?;
                for (i, v) in values.iter().enumerate() {
                    write!(f, "{}{}", if i == 0 { "" } else { "," }, v.bit())?;
                }
                if *cycle {
                    write!(f, ":cycle")?;
                }
                Ok(())
            }
            RealityStrategy::GreedyAdversary(l) => write!(f, "greedy:{l}"),
        }
    }
}

impl FromStr for RealityStrategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, StrategyError> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("bernoulli:") {
            let (p, seed) = match rest.split_once(':') {
                Some((p, seed)) => (p, parse_num(s, seed)?),
                None => (rest, 0),
            };
            return Ok(RealityStrategy::Bernoulli { p: parse_unit(s, p)?, seed });
        }
        if let Some(rest) = s.strip_prefix("script:") {
            let (values, cycle) = parse_script(s, rest, |x| {
                let bit: i64 = parse_num(s, x)?;
                Outcome::from_bit(bit).or_else(|e| err(s, e.to_string()))
            })?;
            return Ok(RealityStrategy::Scripted { values, cycle });
        }
        if let Some(rest) = s.strip_prefix("greedy:") {
            let loss = rest.parse().or_else(|e: crate::loss::LossError| err(s, e.to_string()))?;
            return Ok(RealityStrategy::GreedyAdversary(loss));
        }
        err(s, "unknown reality strategy")
    }
}
