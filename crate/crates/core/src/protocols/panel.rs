//! Virtual experts: re-judging a base panel's predictions under fixed losses.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ExpertPanel, ProtocolError, Transcript};
use crate::engine::ExpertAdvice;
use crate::loss::{LossFunction, LossSpec};

/// A loss function together with the learning rate it is applied at.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluator {
    pub loss: LossSpec,
    pub eta: f64,
}

impl Evaluator {
    pub fn new(loss: LossSpec, eta: f64) -> Result<Self, ProtocolError> {
        let ev = Evaluator { loss, eta };
        ev.probe().validate().map_err(ProtocolError::InvalidRelation)?;
        Ok(ev)
    }

    pub fn at_mixability_constant(loss: LossSpec) -> Result<Self, ProtocolError> {
        let eta = loss.mixability_constant()?;
        Self::new(loss, eta)
    }

    fn probe(&self) -> ExpertAdvice {
        ExpertAdvice::abstain(self.eta, self.loss.clone())
    }
}

/// Which losses each expert is judged by: edges `(expert n, loss m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteRelation {
    n_experts: usize,
    evaluators: Vec<Evaluator>,
    edges: Vec<(usize, usize)>,
}

impl BipartiteRelation {
    /// Every expert needs at least one edge; edges must be distinct and in
    /// range.
    pub fn new(n_experts: usize, evaluators: Vec<Evaluator>, edges: Vec<(usize, usize)>) -> Result<Self, ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidRelation(msg));
        let mut seen = BTreeSet::new();
        for &(n, m) in &edges {
            if n >= n_experts || m >= evaluators.len() {
                return bad(format!("edge ({n}, {m}) is out of range"));
            }
            if !seen.insert((n, m)) {
                return bad(format!("edge ({n}, {m}) appears twice"));
            }
        }
        if let Some(lonely) = (0..n_experts).find(|n| !edges.iter().any(|e| e.0 == *n)) {
            return bad(format!("expert {lonely} has no loss function"));
        }
        Ok(BipartiteRelation { n_experts, evaluators, edges })
    }

    /// All `N·M` pairs, expert-major.
    pub fn complete(n_experts: usize, evaluators: Vec<Evaluator>) -> Result<Self, ProtocolError> {
        let edges = (0..n_experts).flat_map(|n| (0..evaluators.len()).map(move |m| (n, m))).collect();
        Self::new(n_experts, evaluators, edges)
    }

    /// Expert `n` linked to loss `n`.
    pub fn diagonal(evaluators: Vec<Evaluator>) -> Result<Self, ProtocolError> {
        let edges = (0..evaluators.len()).map(|n| (n, n)).collect();
        Self::new(evaluators.len(), evaluators, edges)
    }

    /// Number of edges `K`.
    pub fn cardinality(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn evaluators(&self) -> &[Evaluator] {
        &self.evaluators
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }
}

/// One virtual expert per relation edge `(n, m)`: it predicts what base
/// expert `n` predicts (abstaining when `n` abstains) and is judged by
/// loss `m`.
#[derive(Debug, Clone)]
pub struct VirtualPanel<P> {
    base: P,
    relation: BipartiteRelation,
}

impl<P: ExpertPanel> VirtualPanel<P> {
    pub fn new(base: P, relation: BipartiteRelation) -> Result<Self, ProtocolError> {
        if relation.n_experts != base.n_experts() {
            return Err(ProtocolError::InvalidRelation(format!(
                "relation covers {} experts, panel has {}",
                relation.n_experts,
                base.n_experts()
            )));
        }
        Ok(VirtualPanel { base, relation })
    }

    /// Expert `n` judged by `evaluators[n]` only.
    pub fn constant(base: P, evaluators: Vec<Evaluator>) -> Result<Self, ProtocolError> {
        Self::new(base, BipartiteRelation::diagonal(evaluators)?)
    }

    pub fn relation(&self) -> &BipartiteRelation {
        &self.relation
    }

    pub fn into_base(self) -> P {
        self.base
    }
}

impl<P: ExpertPanel> ExpertPanel for VirtualPanel<P> {
    fn n_experts(&self) -> usize {
        self.relation.cardinality()
    }

    fn labels(&self) -> Vec<String> {
        let base = self.base.labels();
        self.relation
            .edges
            .iter()
            .map(|&(n, m)| format!("{}@{}", base[n], self.relation.evaluators[m].loss))
            .collect()
    }

    fn advise(&mut self, t: usize, history: &Transcript) -> Result<Vec<ExpertAdvice>, ProtocolError> {
        let base = self.base.advise(t, history)?;
        if base.len() != self.relation.n_experts {
            return Err(ProtocolError::AdviceCount { step: t, expected: self.relation.n_experts, got: base.len() });
        }
        Ok(self
            .relation
            .edges
            .iter()
            .map(|&(n, m)| {
                let ev = &self.relation.evaluators[m];
                ExpertAdvice { advice: base[n].advice, eta: ev.eta, loss: ev.loss.clone() }
            })
            .collect())
    }
}

/// Replays each of the base panel's experts once per loss: `M·N` virtual
/// experts with bound `ln(MN) / η^m`.
pub fn multiobjective_wrap<P: ExpertPanel>(base: P, evaluators: Vec<Evaluator>) -> Result<VirtualPanel<P>, ProtocolError> {
    let relation = BipartiteRelation::complete(base.n_experts(), evaluators)?;
    VirtualPanel::new(base, relation)
}

/// One virtual expert per edge: `K` experts with bound `ln K / η^m`.
pub fn bipartite_wrap<P: ExpertPanel>(base: P, relation: BipartiteRelation) -> Result<VirtualPanel<P>, ProtocolError> {
    VirtualPanel::new(base, relation)
}
