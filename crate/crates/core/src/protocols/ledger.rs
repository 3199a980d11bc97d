//! Cumulative losses and regret bounds.

use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::ExpertAdvice;
use crate::loss::{LossFunction, LossSpec, Outcome, Prediction};
use crate::math::{ln, loss_diff};

/// Slack allowed on every regret bound.
pub const BOUND_TOL: f64 = 1e-6;

/// Running totals for one (possibly virtual) expert. Only the steps on
/// which the expert was awake contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub label: String,
    /// Learner's cumulative loss as judged by this expert's losses.
    pub learner_loss: f64,
    /// Expert's own cumulative loss.
    pub expert_loss: f64,
    /// `Σ (λ(π,ω) − λ(γ,ω))` with `∞ − ∞ = 0`.
    pub regret: f64,
    /// `Σ η·(λ(π,ω) − λ(γ,ω))`.
    pub weighted_regret: f64,
    pub awake_steps: usize,
    /// Loss and learning rate, while they have stayed the same on every
    /// awake step.
    pub constant: Option<(LossSpec, f64)>,
    /// Set once loss or rate changed between awake steps.
    pub varying: bool,
}

impl LedgerRow {
    fn new(label: String) -> Self {
        LedgerRow {
            label,
            learner_loss: 0.0,
            expert_loss: 0.0,
            regret: 0.0,
            weighted_regret: 0.0,
            awake_steps: 0,
            constant: None,
            varying: false,
        }
    }

    fn book(&mut self, advice: &ExpertAdvice, pi: Prediction, omega: Outcome) {
        let Some(gamma) = advice.advice.prediction() else { return };
        let own = advice.loss.evaluate(pi, omega);
        let theirs = advice.loss.evaluate(gamma, omega);
        self.learner_loss += own;
        self.expert_loss += theirs;
        let d = loss_diff(own, theirs);
        // once infinite, a regret stays put: the expert (or learner) is out
        if self.regret.is_finite() {
            self.regret += d;
        }
        if self.weighted_regret.is_finite() && d != 0.0 {
            self.weighted_regret += advice.eta * d;
        }
        self.awake_steps += 1;
        if !self.varying {
            match &self.constant {
                None => self.constant = Some((advice.loss.clone(), advice.eta)),
                Some((l, e)) if *l == advice.loss && *e == advice.eta => {}
                Some(_) => {
                    self.constant = None;
                    self.varying = true;
                }
            }
        }
    }
}

/// All cumulative losses of a game plus the bound of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    rows: Vec<LedgerRow>,
    priors: Option<Vec<f64>>,
    steps: usize,
    shared_loss: Option<LossSpec>,
    shared_broken: bool,
    standard_learner_loss: f64,
    awake: Vec<Vec<bool>>,
}

impl RegretLedger {
    /// `priors` defaults to uniform `1/N`.
    pub fn new(labels: Vec<String>, priors: Option<&[f64]>) -> Self {
        RegretLedger {
            rows: labels.into_iter().map(LedgerRow::new).collect(),
            priors: priors.map(<[f64]>::to_vec),
            steps: 0,
            shared_loss: None,
            shared_broken: false,
            standard_learner_loss: 0.0,
            awake: Vec::new(),
        }
    }

    /// Books one step. `advice` must have one entry per row.
    pub fn record(&mut self, advice: &[ExpertAdvice], pi: Prediction, omega: Outcome) {
        debug_assert_eq!(advice.len(), self.rows.len());
        let mut step_loss = None;
        for (row, a) in self.rows.iter_mut().zip(advice) {
            row.book(a, pi, omega);
            if a.advice.is_awake() && !self.shared_broken {
                match &self.shared_loss {
                    None => self.shared_loss = Some(a.loss.clone()),
                    Some(l) if *l == a.loss => {}
                    Some(_) => self.shared_broken = true,
                }
                step_loss = Some(a.loss.evaluate(pi, omega));
            }
        }
        if !self.shared_broken {
            self.standard_learner_loss += step_loss.unwrap_or(0.0);
        }
        self.awake.push(advice.iter().map(|a| a.advice.is_awake()).collect());
        self.steps += 1;
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn priors(&self) -> Option<&[f64]> {
        self.priors.as_deref()
    }

    /// Awake mask of every booked step.
    pub fn awake_history(&self) -> &[Vec<bool>] {
        &self.awake
    }

    /// The learner's cumulative loss `L_t` when every awake expert so far
    /// has used one and the same loss.
    pub fn standard_learner_loss(&self) -> Option<f64> {
        (!self.shared_broken).then_some(self.standard_learner_loss)
    }

    /// Bound on the weighted regret of row `n`: `−ln p^n`, which is `ln N`
    /// under uniform priors.
    pub fn weighted_bound(&self, n: usize) -> f64 {
        match &self.priors {
            Some(p) => -ln(p[n]),
            None => ln(self.rows.len() as f64),
        }
    }

    /// Bound on the plain regret of row `n`, available when its learning
    /// rate was constant: `weighted_bound / η`.
    pub fn bound(&self, n: usize) -> Option<f64> {
        let row = &self.rows[n];
        match &row.constant {
            Some((_, eta)) => Some(self.weighted_bound(n) / eta),
            None if row.awake_steps == 0 => Some(0.0),
            None => None,
        }
    }

    fn row_passes(&self, n: usize, tol: f64) -> bool {
        let row = &self.rows[n];
        row.weighted_regret <= self.weighted_bound(n) + tol && self.bound(n).is_none_or(|b| row.regret <= b + tol)
    }

    /// First row currently over its bound.
    pub fn first_violation(&self, tol: f64) -> Option<usize> {
        (0..self.rows.len()).find(|&n| !self.row_passes(n, tol))
    }

    pub fn report(&self, tol: f64) -> LedgerReport {
        let rows: Vec<ReportRow> = self
            .rows
            .iter()
            .enumerate()
            .map(|(n, row)| {
                let weighted_bound = self.weighted_bound(n);
                let bound = self.bound(n);
                let slack = match bound {
                    Some(b) => b - row.regret,
                    None => weighted_bound - row.weighted_regret,
                };
                let pass = self.row_passes(n, tol);
                ReportRow {
                    label: row.label.clone(),
                    loss: match (&row.constant, row.varying) {
                        (Some((l, _)), _) => l.id(),
                        (None, true) => String::from("varying"),
                        (None, false) => String::from("none"),
                    },
                    eta: row.constant.as_ref().map(|c| c.1),
                    awake_steps: row.awake_steps,
                    learner_loss: row.learner_loss,
                    expert_loss: row.expert_loss,
                    regret: row.regret,
                    bound,
                    weighted_regret: row.weighted_regret,
                    weighted_bound,
                    slack,
                    pass,
                }
            })
            .collect();
        LedgerReport {
            steps: self.steps,
            standard_learner_loss: self.standard_learner_loss(),
            all_pass: rows.iter().all(|r| r.pass),
            rows,
        }
    }
}

/// One row of a [`LedgerReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    /// Loss id, `varying`, or `none` for an expert that never woke.
    pub loss: String,
    pub eta: Option<f64>,
    pub awake_steps: usize,
    pub learner_loss: f64,
    pub expert_loss: f64,
    pub regret: f64,
    pub bound: Option<f64>,
    pub weighted_regret: f64,
    pub weighted_bound: f64,
    /// `bound − regret`, in weighted units when the rate varied.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    pub steps: usize,
    pub standard_learner_loss: Option<f64>,
    pub rows: Vec<ReportRow>,
    pub all_pass: bool,
}

impl LedgerReport {
    /// First failing row.
    pub fn first_failure(&self) -> Option<(usize, &ReportRow)> {
        self.rows.iter().enumerate().find(|(_, r)| !r.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(x: f64) -> Prediction {
        Prediction::new(x).unwrap()
    }

    #[test]
    fn empty_game_passes() {
        let ledger = RegretLedger::new(vec![String::from("a"), String::from("b")], None);
        let report = ledger.report(BOUND_TOL);
        assert!(report.all_pass);
        assert!(report.rows.iter().all(|r| r.regret == 0.0 && r.slack >= 0.0));
    }

    #[test]
    fn books_awake_steps_only() {
        let mut ledger = RegretLedger::new(vec![String::from("a"), String::from("b")], Some(&[0.5, 0.5]));
        let advice = [ExpertAdvice::predict(p(0.8), 1.0, LossSpec::Log), ExpertAdvice::abstain(1.0, LossSpec::Log)];
        ledger.record(&advice, p(0.5), Outcome::One);
        let rows = ledger.rows();
        assert!((rows[0].regret - ln(1.6)).abs() < 1e-15);
        assert_eq!(rows[0].awake_steps, 1);
        assert_eq!(rows[1].awake_steps, 0);
        assert_eq!(rows[1].learner_loss, 0.0);
        assert_eq!(ledger.awake_history(), &[vec![true, false]]);
        assert!((ledger.standard_learner_loss().unwrap() - ln(2.0)).abs() < 1e-15);
    }

    #[test]
    fn fixed_half_against_sharp_expert_fails() {
        let mut ledger = RegretLedger::new(vec![String::from("sharp")], None);
        let advice = [ExpertAdvice::predict(p(1.0), 2.0, LossSpec::Square)];
        for _ in 0..10 {
            ledger.record(&advice, p(0.5), Outcome::One);
        }
        let report = ledger.report(BOUND_TOL);
        assert!(!report.all_pass);
        assert!((report.rows[0].regret - 2.5).abs() < 1e-12);
        assert_eq!(report.rows[0].bound, Some(0.0));
    }

    #[test]
    fn varying_rates_drop_the_plain_bound() {
        let mut ledger = RegretLedger::new(vec![String::from("a"), String::from("b")], None);
        for eta in [1.0, 0.5] {
            let advice =
                [ExpertAdvice::predict(p(0.5), eta, LossSpec::Log), ExpertAdvice::predict(p(0.5), 2.0, LossSpec::Square)];
            ledger.record(&advice, p(0.5), Outcome::Zero);
        }
        assert_eq!(ledger.bound(0), None);
        assert!((ledger.bound(1).unwrap() - ln(2.0) / 2.0).abs() < 1e-15);
        assert_eq!(ledger.standard_learner_loss(), None);
        assert_eq!(ledger.report(BOUND_TOL).rows[0].loss, "varying");
    }
}
