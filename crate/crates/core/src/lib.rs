//! Prediction with expert evaluators' advice.
//!
//! Every expert in this game carries their own loss function and learning
//! rate, and judges both themself and the learner by it. The learner plays
//! the defensive forecasting strategy ([`engine`]), which keeps the
//! mixture of per-expert supermartingales from growing and therefore keeps
//! each expert's learning-rate-weighted regret below `ln N`.
//!
//! The [`specialist`] module implements the explicit algorithm for experts
//! who may abstain; with every expert awake it is the Aggregating Algorithm.
//! [`protocols`] drives complete games and keeps the regret ledgers,
//! [`sim`] provides expert and reality strategies.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature to get
//! `std::error::Error` impls through `core::error::Error`.
//!
//! ```
//! use defcast_core::engine::{DefensiveForecaster, ExpertAdvice};
//! use defcast_core::loss::{LossSpec, Outcome, Prediction};
//!
//! let mut df = DefensiveForecaster::new(2);
//! let advice = [
//!     ExpertAdvice::predict(Prediction::new(0.2).unwrap(), 1.0, LossSpec::Log),
//!     ExpertAdvice::predict(Prediction::new(0.6).unwrap(), 1.0, LossSpec::Log),
//! ];
//! let decision = df.predict(&advice).unwrap();
//! assert!((decision.prediction.get() - 0.4).abs() < 1e-9);
//! df.observe(&advice, decision.prediction, Outcome::One).unwrap();
//! ```
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod loss;
pub mod math;
pub mod protocols;
pub mod sim;
pub mod specialist;

pub use engine::{DefensiveForecaster, EvaluatorState, ExpertAdvice, StepDecision};
pub use loss::{LossFunction, LossSpec, Outcome, Prediction};
pub use protocols::{RegretLedger, Transcript};
pub use specialist::{SpecialistConfig, SpecialistState};
