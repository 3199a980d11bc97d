//! Ledger documents (JSON and text) and regret-curve tables.

use std::fmt::Write as _;
use std::io::Write;

use defcast_core::protocols::{LedgerReport, RegretLedger, ReportRow, Transcript};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// An extended real: JSON numbers for finite values, the strings `"inf"`,
/// `"-inf"` and `"nan"` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ext(pub f64);

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            x if x.is_finite() => s.serialize_f64(x),
            x if x == f64::INFINITY => s.serialize_str("inf"),
            x if x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            _ => s.serialize_str("nan"),
        }
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Ext(x)),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(Ext(f64::INFINITY)),
                "-inf" => Ok(Ext(f64::NEG_INFINITY)),
                "nan" => Ok(Ext(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("`{other}` is not a number"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDoc {
    pub label: String,
    pub loss: String,
    pub eta: Option<f64>,
    pub awake_steps: usize,
    pub learner_loss: Ext,
    pub expert_loss: Ext,
    pub regret: Ext,
    pub bound: Option<Ext>,
    pub weighted_regret: Ext,
    pub weighted_bound: Ext,
    pub slack: Ext,
    pub pass: bool,
}

/// The machine-readable ledger written next to each transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerDoc {
    pub protocol: String,
    pub seed: u64,
    pub steps: usize,
    pub bound_tolerance: f64,
    pub standard_learner_loss: Option<Ext>,
    pub all_pass: bool,
    pub rows: Vec<RowDoc>,
}

impl LedgerDoc {
    pub fn new(protocol: &str, seed: u64, tol: f64, report: &LedgerReport) -> Self {
        let row = |r: &ReportRow| RowDoc {
            label: r.label.clone(),
            loss: r.loss.clone(),
            eta: r.eta,
            awake_steps: r.awake_steps,
            learner_loss: Ext(r.learner_loss),
            expert_loss: Ext(r.expert_loss),
            regret: Ext(r.regret),
            bound: r.bound.map(Ext),
            weighted_regret: Ext(r.weighted_regret),
            weighted_bound: Ext(r.weighted_bound),
            slack: Ext(r.slack),
            pass: r.pass,
        };
        LedgerDoc {
            protocol: protocol.to_string(),
            seed,
            steps: report.steps,
            bound_tolerance: tol,
            standard_learner_loss: report.standard_learner_loss.map(Ext),
            all_pass: report.all_pass,
            rows: report.rows.iter().map(row).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse { line: e.line(), msg: e.to_string() })
    }

    /// Fixed-width table, one row per expert.
    pub fn to_table(&self) -> String {
        let num = |x: f64| if x.is_finite() { format!("{x:.6}") } else { format!("{x}") };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "protocol {}  seed {}  steps {}  tolerance {:e}",
            self.protocol, self.seed, self.steps, self.bound_tolerance
        );
        if let Some(l) = self.standard_learner_loss {
            let _ = writeln!(out, "learner loss {}", num(l.0));
        }
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {:>8}  {:>14}  {:>14}  {:>12}  {:>12}  {:>12}  status",
            "expert", "loss", "eta", "learner_loss", "expert_loss", "regret", "bound", "slack"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12}  {:>8}  {:>14}  {:>14}  {:>12}  {:>12}  {:>12}  {}",
                r.label,
                r.loss,
                r.eta.map_or(String::from("-"), |e| format!("{e}")),
                num(r.learner_loss.0),
                num(r.expert_loss.0),
                num(r.regret.0),
                r.bound.map_or(String::from("-"), |b| num(b.0)),
                num(r.slack.0),
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "{}", if self.all_pass { "all bounds hold" } else { "BOUND VIOLATED" });
        out
    }
}

/// Writes `step,expert,label,regret,bound,weighted_regret,weighted_bound`
/// for every step and expert, replaying the transcript through a fresh
/// ledger.
pub fn write_regret_curve<W: Write>(out: W, transcript: &Transcript, labels: &[String]) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Output(e.to_string());
    csv.write_record(["step", "expert", "label", "regret", "bound", "weighted_regret", "weighted_bound"]).map_err(io)?;
    let mut ledger = RegretLedger::new(labels.to_vec(), transcript.priors.as_deref());
    for (i, step) in transcript.steps.iter().enumerate() {
        ledger.record(&step.advice, step.prediction, step.outcome);
        for (n, row) in ledger.rows().iter().enumerate() {
            csv.write_record([
                (i + 1).to_string(),
                n.to_string(),
                row.label.clone(),
                row.regret.to_string(),
                ledger.bound(n).map_or(String::new(), |b| b.to_string()),
                row.weighted_regret.to_string(),
                ledger.weighted_bound(n).to_string(),
            ])
            .map_err(io)?;
        }
    }
    csv.flush().map_err(|e| CliError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_reals_round_trip() {
        for x in [0.25, f64::INFINITY, f64::NEG_INFINITY] {
            let text = serde_json::to_string(&Ext(x)).unwrap();
            assert_eq!(serde_json::from_str::<Ext>(&text).unwrap(), Ext(x));
        }
        assert_eq!(serde_json::to_string(&Ext(f64::NEG_INFINITY)).unwrap(), "\"-inf\"");
        assert!(serde_json::from_str::<Ext>("\"big\"").is_err());
    }

    #[test]
    fn empty_ledger_document() {
        let ledger = RegretLedger::new(vec![String::from("a")], None);
        let doc = LedgerDoc::new("evaluators", 3, 1e-6, &ledger.report(1e-6));
        assert_eq!(LedgerDoc::from_json(&doc.to_json()).unwrap(), doc);
        assert!(doc.to_table().contains("all bounds hold"));
    }
}
