//! Ablation runs on a prepared target/external pair.

use serde::{Deserialize, Serialize};

use crate::alignment::{align, remap, AliasTable};
use crate::error::Result;
use crate::eval::{default_cutoffs, rank, EvaluationSet, Metrics};
use crate::graph::KnowledgeGraph;
use crate::synth::SyntheticPair;
use crate::trainer::{train, TrainerConfig, TrainingData};

/// Which parts of the framework are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Plain embedding of the target graph alone.
    SingleGraph,
    /// Joint embedding of both graphs through shared entities.
    TwoGraph,
    /// Joint embedding with confidence weighting of target triplets.
    WithConfidence,
    /// Confidence weighting plus cross-graph negatives.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SingleGraph,
        Variant::TwoGraph,
        Variant::WithConfidence,
        Variant::Full,
    ];

    pub fn configure(self, base: &TrainerConfig) -> TrainerConfig {
        let (confidence, cross) = match self {
            Variant::SingleGraph | Variant::TwoGraph => (false, false),
            Variant::WithConfidence => (true, false),
            Variant::Full => (true, true),
        };
        TrainerConfig {
            confidence,
            cross_negatives: cross,
            ..base.clone()
        }
    }

    pub fn uses_external(self) -> bool {
        !matches!(self, Variant::SingleGraph)
    }
}

/// Target graph, remapped external graph and labeled target triplets.
pub struct PreparedPair {
    pub target: KnowledgeGraph,
    pub external: KnowledgeGraph,
    pub eval: EvaluationSet,
}

impl PreparedPair {
    pub fn from_synthetic(pair: &SyntheticPair) -> Result<Self> {
        let map = align(&pair.target, &pair.external, &AliasTable::new());
        Ok(PreparedPair {
            target: pair.target.clone(),
            external: remap(&pair.external, &map)?,
            eval: pair.eval.clone(),
        })
    }

    /// Trains `variant` and evaluates it on the labeled triplets.
    pub fn run(&self, variant: Variant, base: &TrainerConfig) -> Result<Metrics> {
        self.run_with(variant.uses_external(), &variant.configure(base))
    }

    /// Trains with `config` as given, with or without the external graph.
    pub fn run_with(&self, use_external: bool, config: &TrainerConfig) -> Result<Metrics> {
        let data = TrainingData {
            target: &self.target,
            external: use_external.then_some(&self.external),
        };
        let outcome = train(&data, config)?;
        rank(&outcome.model, &self.eval)?.metrics(&default_cutoffs(self.eval.len()))
    }
}
