//! Line-delimited JSON transcripts.
//!
//! An optional first line `{"priors": [...]}` carries the prior weights of a
//! specialist game. Every other line is one step:
//!
//! ```json
//! {"t":1,"advice":[{"gamma":0.3,"eta":1.0,"loss":"log"},{"gamma":"abstain","eta":2.0,"loss":"square"}],"pi":0.41,"omega":1}
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a transcript
//! back gives bit-identical values.

use std::io::{BufRead, Write};

use defcast_core::engine::{Advice, ExpertAdvice};
use defcast_core::loss::{Outcome, Prediction};
use defcast_core::protocols::{Step, Transcript};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Gamma {
    Value(f64),
    Marker(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdviceRecord {
    gamma: Gamma,
    eta: f64,
    loss: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    t: usize,
    advice: Vec<AdviceRecord>,
    pi: f64,
    omega: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    priors: Vec<f64>,
}

fn to_record(t: usize, step: &Step) -> StepRecord {
    StepRecord {
        t,
        advice: step
            .advice
            .iter()
            .map(|a| AdviceRecord {
                gamma: match a.advice {
                    Advice::Predict(g) => Gamma::Value(g.get()),
                    Advice::Abstain => Gamma::Marker(String::from("abstain")),
                },
                eta: a.eta,
                loss: a.loss.id(),
            })
            .collect(),
        pi: step.prediction.get(),
        omega: step.outcome.bit(),
    }
}

fn from_record(line: usize, rec: StepRecord) -> Result<Step, CliError> {
    let bad = |msg: String| CliError::Parse { line, msg };
    let advice = rec
        .advice
        .into_iter()
        .enumerate()
        .map(|(n, a)| {
            let advice = match a.gamma {
                Gamma::Value(g) => {
                    Advice::Predict(Prediction::new(g).map_err(|e| bad(format!("expert {n}: gamma: {e}")))?)
                }
                Gamma::Marker(m) if m == "abstain" => Advice::Abstain,
                Gamma::Marker(m) => return Err(bad(format!("expert {n}: gamma `{m}` is neither a number nor \"abstain\""))),
            };
            let loss = a.loss.parse().map_err(|e| bad(format!("expert {n}: {e}")))?;
            Ok(ExpertAdvice { advice, eta: a.eta, loss })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let prediction = Prediction::new(rec.pi).map_err(|e| bad(format!("pi: {e}")))?;
    let outcome = Outcome::from_bit(rec.omega.into()).map_err(|e| bad(format!("omega: {e}")))?;
    Ok(Step { advice, prediction, outcome })
}

pub fn write_transcript<W: Write>(out: &mut W, transcript: &Transcript) -> std::io::Result<()> {
    if let Some(priors) = &transcript.priors {
        serde_json::to_writer(&mut *out, &Header { priors: priors.clone() })?;
        writeln!(out)?;
    }
    for (i, step) in transcript.steps.iter().enumerate() {
        serde_json::to_writer(&mut *out, &to_record(i + 1, step))?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn transcript_to_string(transcript: &Transcript) -> String {
    let mut buf = Vec::new();
    write_transcript(&mut buf, transcript).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Reads a transcript. Step numbers must run 1, 2, 3, …; blank lines are
/// skipped.
pub fn read_transcript<R: BufRead>(input: R) -> Result<Transcript, CliError> {
    let mut transcript = Transcript::new();
    let mut seen_step = false;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CliError::Parse { line: line_no, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        if !seen_step && transcript.priors.is_none() {
            if let Ok(h) = serde_json::from_str::<Header>(&line) {
                transcript.priors = Some(h.priors);
                continue;
            }
        }
        let rec: StepRecord =
            serde_json::from_str(&line).map_err(|e| CliError::Parse { line: line_no, msg: e.to_string() })?;
        if rec.t != transcript.len() + 1 {
            return Err(CliError::Parse {
                line: line_no,
                msg: format!("step number {} out of sequence, expected {}", rec.t, transcript.len() + 1),
            });
        }
        transcript.push(from_record(line_no, rec)?);
        seen_step = true;
    }
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use defcast_core::loss::LossSpec;

    #[test]
    fn round_trip_is_exact() {
        let mut tr = Transcript::with_priors(vec![0.7, 0.3]);
        tr.push(Step {
            advice: vec![
                ExpertAdvice::predict(Prediction::new(0.1 + 0.2).unwrap(), 1.0, LossSpec::Log),
                ExpertAdvice::abstain(0.5, LossSpec::generalized_log(0.5).unwrap()),
            ],
            prediction: Prediction::new(1.0 / 3.0).unwrap(),
            outcome: Outcome::One,
        });
        let text = transcript_to_string(&tr);
        assert!(text.lines().nth(1).unwrap().starts_with(r#"{"t":1,"advice":[{"gamma":0.30000000000000004"#));
        assert_eq!(read_transcript(text.as_bytes()).unwrap(), tr);
    }

    #[test]
    fn rejects_malformed_lines() {
        let ok = r#"{"t":1,"advice":[{"gamma":"abstain","eta":1.0,"loss":"log"}],"pi":0.5,"omega":0}"#;
        assert_eq!(read_transcript(ok.as_bytes()).unwrap().len(), 1);
        for bad in [
            ok.replace("\"t\":1", "\"t\":2"),
            ok.replace("0.5", "1.5"),
            ok.replace("\"omega\":0", "\"omega\":2"),
            ok.replace("abstain", "sleep"),
            ok.replace("log", "cubic"),
            String::from("{"),
        ] {
            assert!(matches!(read_transcript(bad.as_bytes()), Err(CliError::Parse { line: 1, .. })), "{bad}");
        }
        assert_eq!(read_transcript("".as_bytes()).unwrap(), Transcript::new());
    }
}
