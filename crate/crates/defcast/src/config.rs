//! Run configuration, read from TOML.
//!
//! ```toml
//! protocol = "constant"        # standard | evaluators | constant | multiobjective | bipartite | specialist
//! horizon = 10000
//! seeds = [1, 2, 3]
//! experts = ["constant:0.3", "uniform", "drift:0.1:0.001"]
//! reality = "greedy:log"
//! losses = ["log", "square", "log"]   # constant: one per expert; multiobjective/bipartite: the loss set
//! etas = [1.0, 2.0, 1.0]              # optional, defaults to each loss's mixability constant
//! edges = [[0, 0], [1, 1], [2, 0]]    # bipartite only
//! loss = "square"                     # standard and specialist
//! eta = 2.0                           # optional
//! priors = [0.5, 0.3, 0.2]            # specialist only, defaults to uniform
//! learner = "df"                      # or "fixed:<p>", a baseline without guarantees
//! output_dir = "out"                  # relative to the config file
//! ```

use std::path::{Path, PathBuf};

use defcast_core::loss::{LossSpec, Prediction};
use defcast_core::protocols::{BipartiteRelation, Evaluator, Learner};
use defcast_core::sim::{ExpertStrategy, RealityStrategy};
use defcast_core::specialist::SpecialistConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Standard,
    Evaluators,
    Constant,
    Multiobjective,
    Bipartite,
    Specialist,
}

/// The document as written.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub protocol: ProtocolKind,
    pub horizon: usize,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub experts: Vec<String>,
    pub reality: String,
    #[serde(default)]
    pub losses: Option<Vec<String>>,
    #[serde(default)]
    pub etas: Option<Vec<f64>>,
    #[serde(default)]
    pub edges: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub loss: Option<String>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
    #[serde(default)]
    pub learner: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// How the experts' advice is turned into the panel the learner faces.
#[derive(Debug, Clone)]
pub enum Setup {
    /// Experts play with their own losses and rates.
    Evaluators,
    /// Virtual experts over a relation (constant, multiobjective, bipartite
    /// and standard protocols).
    Relation(BipartiteRelation),
    Specialist(SpecialistConfig),
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub experts: Vec<ExpertStrategy>,
    pub reality: RealityStrategy,
    pub setup: Setup,
    pub learner: Learner,
    pub output_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_loss(text: &str) -> Result<LossSpec, CliError> {
    text.parse().map_err(|e| invalid(format!("loss `{text}`: {e}")))
}

fn evaluators(losses: &[String], etas: Option<&[f64]>) -> Result<Vec<Evaluator>, CliError> {
    if let Some(etas) = etas {
        if etas.len() != losses.len() {
            return Err(invalid(format!("{} etas for {} losses", etas.len(), losses.len())));
        }
    }
    losses
        .iter()
        .enumerate()
        .map(|(m, text)| {
            let loss = parse_loss(text)?;
            let ev = match etas {
                Some(etas) => Evaluator::new(loss, etas[m]),
                None => Evaluator::at_mixability_constant(loss),
            };
            ev.map_err(|e| invalid(format!("loss {m} (`{text}`): {e}")))
        })
        .collect()
}

fn parse_learner(text: Option<&str>) -> Result<Learner, CliError> {
    match text.map(str::trim) {
        None | Some("df") => Ok(Learner::DefensiveForecasting),
        Some(other) => {
            let p = other
                .strip_prefix("fixed:")
                .and_then(|p| p.parse::<f64>().ok())
                .and_then(|p| Prediction::new(p).ok())
                .ok_or_else(|| invalid(format!("learner `{other}`: expected `df` or `fixed:<p>`")))?;
            Ok(Learner::Fixed(p))
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        Self::from_raw(raw, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self, CliError> {
        if raw.experts.is_empty() {
            return Err(invalid("at least one expert is required"));
        }
        let experts = raw
            .experts
            .iter()
            .enumerate()
            .map(|(n, s)| match s.parse::<ExpertStrategy>() {
                // experts without an explicit stream draw from their own
                Ok(e) if e.seed == 0 => Ok(e.with_seed(n as u64 + 1)),
                Ok(e) => Ok(e),
                Err(e) => Err(invalid(format!("expert {n}: {e}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let reality: RealityStrategy = raw.reality.parse().map_err(|e| invalid(format!("reality: {e}")))?;
        let n = experts.len();
        let etas = raw.etas.as_deref();
        let needs = |field: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(invalid(format!("protocol {:?} needs `{field}`", raw.protocol)))
            }
        };
        let forbids = |field: &str, present: bool| {
            if present {
                Err(invalid(format!("`{field}` does not apply to protocol {:?}", raw.protocol)))
            } else {
                Ok(())
            }
        };
        forbids("edges", raw.edges.is_some() && raw.protocol != ProtocolKind::Bipartite)?;
        forbids("priors", raw.priors.is_some() && raw.protocol != ProtocolKind::Specialist)?;
        let single = |raw: &RawConfig| -> Result<Evaluator, CliError> {
            let text = raw.loss.as_deref().unwrap_or_default();
            let loss = parse_loss(text)?;
            match raw.eta {
                Some(eta) => Evaluator::new(loss, eta),
                None => Evaluator::at_mixability_constant(loss),
            }
            .map_err(|e| invalid(format!("loss `{text}`: {e}")))
        };

        let setup = match raw.protocol {
            ProtocolKind::Evaluators => {
                forbids("losses", raw.losses.is_some())?;
                forbids("loss", raw.loss.is_some())?;
                Setup::Evaluators
            }
            ProtocolKind::Standard => {
                needs("loss", raw.loss.is_some())?;
                forbids("losses", raw.losses.is_some())?;
                let ev = single(&raw)?;
                Setup::Relation(BipartiteRelation::diagonal(vec![ev; n]).map_err(|e| invalid(e.to_string()))?)
            }
            ProtocolKind::Constant => {
                let evs = match &raw.losses {
                    Some(losses) => {
                        if losses.len() != n {
                            return Err(invalid(format!("{} losses for {n} experts", losses.len())));
                        }
                        evaluators(losses, etas)?
                    }
                    // each expert keeps the loss and rate of its own spec
                    None => experts.iter().map(|e| Evaluator { loss: e.loss.clone(), eta: e.eta }).collect(),
                };
                Setup::Relation(BipartiteRelation::diagonal(evs).map_err(|e| invalid(e.to_string()))?)
            }
            ProtocolKind::Multiobjective => {
                needs("losses", raw.losses.is_some())?;
                let evs = evaluators(raw.losses.as_deref().unwrap_or_default(), etas)?;
                Setup::Relation(BipartiteRelation::complete(n, evs).map_err(|e| invalid(e.to_string()))?)
            }
            ProtocolKind::Bipartite => {
                needs("losses", raw.losses.is_some())?;
                needs("edges", raw.edges.is_some())?;
                let evs = evaluators(raw.losses.as_deref().unwrap_or_default(), etas)?;
                let edges = raw.edges.clone().unwrap_or_default();
                Setup::Relation(BipartiteRelation::new(n, evs, edges).map_err(|e| invalid(e.to_string()))?)
            }
            ProtocolKind::Specialist => {
                needs("loss", raw.loss.is_some())?;
                forbids("losses", raw.losses.is_some())?;
                let ev = single(&raw)?;
                let cfg = match &raw.priors {
                    Some(p) if p.len() != n => return Err(invalid(format!("{} priors for {n} experts", p.len()))),
                    Some(p) => SpecialistConfig::new(ev.loss, ev.eta, p.clone()),
                    None => SpecialistConfig::uniform(ev.loss, ev.eta, n),
                };
                Setup::Specialist(cfg.map_err(|e| invalid(e.to_string()))?)
            }
        };
        let learner = parse_learner(raw.learner.as_deref())?;
        if raw.protocol == ProtocolKind::Specialist && learner != Learner::DefensiveForecasting {
            return Err(invalid("the specialist protocol always uses its own learner"));
        }
        let seeds = raw.seeds.clone().unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(invalid("`seeds` is empty"));
        }
        let output_dir = base_dir.join(raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("defcast-out")));
        Ok(RunConfig { protocol: raw.protocol, horizon: raw.horizon, seeds, experts, reality, setup, learner, output_dir })
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_toml(text, Path::new("/tmp"))
    }

    #[test]
    fn minimal_constant_config() {
        let cfg = parse(
            r#"
            protocol = "constant"
            horizon = 10
            experts = ["constant:0.3@log", "uniform@square"]
            reality = "bernoulli:0.5:1"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.output_dir, Path::new("/tmp/defcast-out"));
        let Setup::Relation(rel) = &cfg.setup else { panic!() };
        assert_eq!(rel.cardinality(), 2);
        assert_eq!(rel.evaluators()[1].eta, 2.0);
    }

    #[test]
    fn fast_rate_names_the_expert() {
        let err = parse(
            r#"
            protocol = "evaluators"
            horizon = 10
            experts = ["constant:0.3@log", "uniform@square:eta=2.5"]
            reality = "greedy:log"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("expert 1"), "{err}");
    }

    #[test]
    fn protocol_requirements() {
        let base = "horizon = 5\nexperts = [\"uniform\", \"uniform\"]\nreality = \"greedy:log\"\n";
        assert!(parse(&format!("protocol = \"specialist\"\n{base}")).is_err());
        assert!(parse(&format!("protocol = \"specialist\"\nloss = \"log\"\npriors = [0.5, 0.5]\n{base}")).is_ok());
        assert!(parse(&format!("protocol = \"specialist\"\nloss = \"log\"\npriors = [0.5, 0.4]\n{base}")).is_err());
        assert!(parse(&format!("protocol = \"bipartite\"\nlosses = [\"log\"]\nedges = [[0, 0]]\n{base}")).is_err());
        assert!(parse(&format!("protocol = \"bipartite\"\nlosses = [\"log\"]\nedges = [[0, 0], [1, 0]]\n{base}")).is_ok());
        assert!(parse(&format!("protocol = \"standard\"\nloss = \"square\"\nlearner = \"fixed:0.5\"\n{base}")).is_ok());
        assert!(parse(&format!("protocol = \"standard\"\nloss = \"square\"\nlearner = \"oracle\"\n{base}")).is_err());
        assert!(parse(&format!("protocol = \"evaluators\"\nbogus = 1\n{base}")).is_err());
    }
}
