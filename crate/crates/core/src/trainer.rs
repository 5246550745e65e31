//! Confidence-weighted joint training over the target and external graphs.
//!
//! Each optimization step takes one target batch and one external batch and
//! minimizes `L_target + lambda * L_external + l2`:
//!
//! * `L_target = -sum_{s1} sum_{s1'} pi(P(s1)) [log P(s1) + log(1 - P(s1'))]`
//! * `L_external = -sum_{s2} [log P(s2) + sum_{s2'} log(1 - P(s2'))]` where the
//!   inner sum runs over conventional, relation-replaced and entity-replaced
//!   negatives.
//!
//! `pi(p) = p` when `p >= theta`, else 0, and is treated as a constant weight.
//! Both losses are sums over the positives of a batch.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triplet};
use crate::model::{log_sigmoid, sigmoid, EmbeddingModel, GradientBuffer, ModelKind, Slot};
use crate::negatives::{NegativeBatch, NegativeCounts, NegativeRelationIndex, NegativeSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight of the external-graph loss.
    pub lambda: f64,
    /// Confidence threshold.
    pub theta: f64,
    pub l2_coeff: f64,
    pub neg_conventional: usize,
    pub neg_relation: usize,
    pub neg_entity: usize,
    /// Cross-graph negatives (relation and entity replacement).
    pub cross_negatives: bool,
    /// Confidence weighting of target positives.
    pub confidence: bool,
    /// Leading epochs trained with every confidence weight fixed at 1.
    pub confidence_warmup: usize,
    /// Margin of the TransE ranking loss.
    pub margin: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            model: ModelKind::DistMult,
            dim: 32,
            learning_rate: 0.01,
            batch_size: 256,
            epochs: 50,
            lambda: 1.0,
            theta: 0.5,
            l2_coeff: 0.001,
            neg_conventional: 1,
            neg_relation: 1,
            neg_entity: 1,
            cross_negatives: true,
            confidence: true,
            confidence_warmup: 1,
            margin: 1.0,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} is invalid", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return bad(format!("theta must be in [0, 1), got {}", self.theta));
        }
        if self.l2_coeff.is_nan() || self.l2_coeff < 0.0 {
            return bad(format!("l2 coefficient must be >= 0, got {}", self.l2_coeff));
        }
        if self.neg_conventional == 0 {
            return bad("at least one conventional negative is required".into());
        }
        if self.confidence && !self.model.is_multiplicative() {
            return bad(format!(
                "confidence weighting needs a multiplicative score function, not {}",
                self.model
            ));
        }
        Ok(())
    }

    fn counts(&self) -> NegativeCounts {
        NegativeCounts {
            conventional: self.neg_conventional,
            relation_replaced: self.neg_relation,
            entity_replaced: self.neg_entity,
        }
    }
}

/// How target positives are weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// Every weight is 1.
    Off,
    /// `pi(P)` with the given threshold.
    Threshold(f64),
}

/// `pi(p)`: `p` if `p >= theta`, else 0.
pub fn confidence(p: f64, theta: f64) -> f64 {
    if p >= theta {
        p
    } else {
        0.0
    }
}

/// Loss of one target positive and its conventional negatives, gradients
/// added into `buf`. Returns `(loss, weight)`; the weight also multiplies
/// every negative term.
pub fn target_loss(
    m: &EmbeddingModel,
    positive: &Triplet,
    negatives: &[Triplet],
    gate: Gate,
    buf: &mut GradientBuffer,
) -> (f64, f64) {
    let pos_score = m.score(positive);
    let weight = match gate {
        Gate::Off => 1.0,
        Gate::Threshold(theta) => confidence(sigmoid(pos_score), theta),
    };
    if negatives.is_empty() || weight == 0.0 {
        return (0.0, weight);
    }
    let k = negatives.len() as f64;
    let mut loss = -weight * k * log_sigmoid(pos_score);
    // d/dx -log sigmoid(x) = -sigmoid(-x)
    m.accumulate_score_grad(positive, -weight * k * sigmoid_exact(-pos_score), buf);
    for n in negatives {
        let s = m.score(n);
        loss -= weight * log_sigmoid(-s);
        m.accumulate_score_grad(n, weight * sigmoid_exact(s), buf);
    }
    (loss, weight)
}

/// Unweighted logistic loss of one external positive and all its negatives.
pub fn external_loss(
    m: &EmbeddingModel,
    positive: &Triplet,
    negatives: &NegativeBatch,
    buf: &mut GradientBuffer,
) -> f64 {
    let pos_score = m.score(positive);
    let mut loss = -log_sigmoid(pos_score);
    m.accumulate_score_grad(positive, -sigmoid_exact(-pos_score), buf);
    for n in negatives.iter() {
        let s = m.score(n);
        loss -= log_sigmoid(-s);
        m.accumulate_score_grad(n, sigmoid_exact(s), buf);
    }
    loss
}

/// Pairwise margin loss `sum max(phi(s') - phi(s) + margin, 0)` for the
/// translational baseline.
pub fn margin_loss<'a>(
    m: &EmbeddingModel,
    positive: &Triplet,
    negatives: impl IntoIterator<Item = &'a Triplet>,
    margin: f64,
    buf: &mut GradientBuffer,
) -> f64 {
    let pos = m.score(positive);
    let mut loss = 0.0;
    for n in negatives {
        let v = m.score(n) - pos + margin;
        if v > 0.0 {
            loss += v;
            m.accumulate_score_grad(n, 1.0, buf);
            m.accumulate_score_grad(positive, -1.0, buf);
        }
    }
    loss
}

// sigmoid without the reporting clamp, so gradients match the loss exactly
fn sigmoid_exact(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Positives of one step, each with its negatives.
#[derive(Debug, Clone, Default)]
pub struct StepBatch {
    pub target: Vec<(Triplet, NegativeBatch)>,
    pub external: Vec<(Triplet, NegativeBatch)>,
}

#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    /// Target loss summed over the batch.
    pub target_loss: f64,
    /// External loss summed over the batch.
    pub external_loss: f64,
    /// `target_loss + lambda * external_loss + l2`.
    pub objective: f64,
    /// Penalty on slots touched by the target batch, plus lambda times the
    /// penalty on slots touched by the external batch.
    pub l2: f64,
    /// Target positives whose confidence weight was zero.
    pub gated: usize,
    /// Confidence weight of each target positive.
    pub target_weights: Vec<f64>,
    pub grads: GradientBuffer,
}

/// Loss and gradient of one step at fixed parameters.
pub struct StepEvaluator<'a> {
    pub model: &'a EmbeddingModel,
    pub gate: Gate,
    pub lambda: f64,
    pub l2_coeff: f64,
    pub margin: f64,
    pub pool: Option<&'a rayon::ThreadPool>,
}

impl StepEvaluator<'_> {
    fn target_item(&self, (t, negs): &(Triplet, NegativeBatch)) -> (f64, f64, GradientBuffer) {
        let mut buf = GradientBuffer::new();
        if self.model.kind().is_multiplicative() {
            let (l, w) = target_loss(self.model, t, &negs.conventional, self.gate, &mut buf);
            (l, w, buf)
        } else {
            let l = margin_loss(self.model, t, &negs.conventional, self.margin, &mut buf);
            (l, 1.0, buf)
        }
    }

    fn external_item(&self, (t, negs): &(Triplet, NegativeBatch)) -> (f64, f64, GradientBuffer) {
        let mut buf = GradientBuffer::new();
        let l = if self.model.kind().is_multiplicative() {
            external_loss(self.model, t, negs, &mut buf)
        } else {
            margin_loss(self.model, t, negs.iter(), self.margin, &mut buf)
        };
        (l, 1.0, buf)
    }

    fn map_items<F>(&self, items: &[(Triplet, NegativeBatch)], f: F) -> Vec<(f64, f64, GradientBuffer)>
    where
        F: Fn(&(Triplet, NegativeBatch)) -> (f64, f64, GradientBuffer) + Sync + Send,
    {
        match self.pool {
            Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            None => items.iter().map(f).collect(),
        }
    }

    /// Per-item gradients are reduced in item order, so the result does not
    /// depend on the number of worker threads.
    pub fn evaluate(&self, batch: &StepBatch) -> StepOutput {
        let mut out = StepOutput::default();
        let t_items = self.map_items(&batch.target, |it| self.target_item(it));
        let x_items = self.map_items(&batch.external, |it| self.external_item(it));

        for (loss, weight, buf) in &t_items {
            out.target_loss += loss;
            out.gated += usize::from(*weight == 0.0);
            out.target_weights.push(*weight);
            out.grads.merge_scaled(buf, 1.0);
        }
        // Each graph's term carries the penalty of the slots its own batch
        // touched, which keeps the objective affine in lambda.
        let l2_target = self.model.l2_penalty_and_grad(&mut out.grads, self.l2_coeff);
        let mut l2_external = 0.0;
        if self.lambda != 0.0 && !x_items.is_empty() {
            let mut ext = GradientBuffer::new();
            for (_, _, buf) in &x_items {
                ext.merge_scaled(buf, 1.0);
            }
            l2_external = self.model.l2_penalty_and_grad(&mut ext, self.l2_coeff);
            out.grads.merge_scaled(&ext, self.lambda);
        }
        for (loss, _, _) in &x_items {
            out.external_loss += loss;
        }
        // lambda = 0 leaves the external slots untouched
        out.l2 = l2_target + self.lambda * l2_external;
        out.objective = out.target_loss + self.lambda * out.external_loss + out.l2;
        out
    }
}

/// Adam with lazily allocated per-slot moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: HashMap<Slot, (Vec<f64>, Vec<f64>)>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: HashMap::new(),
        }
    }
}

impl Adam {
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn tracked_slots(&self) -> usize {
        self.moments.len()
    }

    /// Updates only the slots present in `grads`; bias correction uses the
    /// global step count.
    pub fn apply(&mut self, model: &mut EmbeddingModel, grads: &GradientBuffer, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (slot, g) in grads.iter() {
            let (m, v) = self
                .moments
                .entry(*slot)
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            let params = model.params_mut(*slot);
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss_g1: f64,
    pub mean_loss_g2: f64,
    pub gated_fraction: f64,
}

pub(crate) fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

const SHUFFLE_STREAM: u64 = 1;
const NEGATIVE_STREAM: u64 = 2;

/// Graphs prepared for training, in a shared id space.
pub struct TrainingData<'a> {
    pub target: &'a KnowledgeGraph,
    pub external: Option<&'a KnowledgeGraph>,
}

impl TrainingData<'_> {
    pub fn num_entities(&self) -> usize {
        self.external
            .map_or(self.target.entities().len(), |g| g.entities().len())
    }

    pub fn num_relations(&self) -> usize {
        self.external
            .map_or(self.target.relations().end(), |g| g.relations().end()) as usize
    }
}

pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub log: Vec<EpochLog>,
}

/// Trains from a fresh initialization.
pub fn train(data: &TrainingData<'_>, config: &TrainerConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut model = EmbeddingModel::init(
        config.model,
        config.dim,
        data.num_entities(),
        data.num_relations(),
        config.seed,
    )?;
    let log = Trainer::new(data, config)?.run(&mut model, |_, _| {})?;
    Ok(TrainOutcome { model, log })
}

/// Training loop over fixed graphs.
pub struct Trainer<'a> {
    data: &'a TrainingData<'a>,
    config: &'a TrainerConfig,
    index: Option<NegativeRelationIndex>,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a TrainingData<'a>, config: &'a TrainerConfig) -> Result<Self> {
        config.validate()?;
        let index = match (config.cross_negatives, data.external) {
            (true, Some(ext)) => Some(NegativeRelationIndex::build(data.target, ext)),
            _ => None,
        };
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Trainer {
            data,
            config,
            index,
            pool,
        })
    }

    pub fn index(&self) -> Option<&NegativeRelationIndex> {
        self.index.as_ref()
    }

    /// Runs all epochs, calling `on_epoch` after each one.
    pub fn run(
        &self,
        model: &mut EmbeddingModel,
        mut on_epoch: impl FnMut(&EpochLog, &EmbeddingModel),
    ) -> Result<Vec<EpochLog>> {
        let cfg = self.config;
        let sampler = NegativeSampler::new(
            self.data.target,
            self.data.external,
            self.index.as_ref(),
            model.num_entities() as u32,
            cfg.counts(),
        );
        let mut shuffle_rng = stream(cfg.seed, SHUFFLE_STREAM);
        let mut neg_rng = stream(cfg.seed, NEGATIVE_STREAM);
        let mut adam = Adam::default();
        let target = self.data.target.triplets();
        let external: &[Triplet] = self.data.external.map_or(&[], |g| g.triplets());
        let mut order1: Vec<usize> = (0..target.len()).collect();
        let mut order2: Vec<usize> = (0..external.len()).collect();
        let steps = target.len().div_ceil(cfg.batch_size).max(1);
        let batch2 = external.len().div_ceil(steps);

        let mut logs = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order1.shuffle(&mut shuffle_rng);
            order2.shuffle(&mut shuffle_rng);
            let gate = if cfg.confidence && epoch >= cfg.confidence_warmup {
                Gate::Threshold(cfg.theta)
            } else {
                Gate::Off
            };
            let (mut sum1, mut sum2, mut gated) = (0.0, 0.0, 0usize);
            for step in 0..steps {
                let lo1 = step * cfg.batch_size;
                let hi1 = (lo1 + cfg.batch_size).min(target.len());
                let lo2 = (step * batch2).min(external.len());
                let hi2 = (lo2 + batch2).min(external.len());
                let mut batch = StepBatch::default();
                for &i in &order1[lo1..hi1] {
                    let t = target[i];
                    batch.target.push((t, sampler.for_target(&t, &mut neg_rng)?));
                }
                for &i in &order2[lo2..hi2] {
                    let t = external[i];
                    batch.external.push((t, sampler.for_external(&t, &mut neg_rng)?));
                }
                let out = StepEvaluator {
                    model,
                    gate,
                    lambda: cfg.lambda,
                    l2_coeff: cfg.l2_coeff,
                    margin: cfg.margin,
                    pool: self.pool.as_ref(),
                }
                .evaluate(&batch);
                if !out.objective.is_finite() {
                    return Err(Error::NonFinite { epoch, batch: step });
                }
                sum1 += out.target_loss;
                sum2 += out.external_loss;
                gated += out.gated;
                adam.apply(model, &out.grads, cfg.learning_rate);
            }
            let entry = EpochLog {
                epoch,
                mean_loss_g1: sum1 / target.len().max(1) as f64,
                mean_loss_g2: if external.is_empty() {
                    0.0
                } else {
                    sum2 / external.len() as f64
                },
                gated_fraction: gated as f64 / target.len().max(1) as f64,
            };
            log::debug!("{}", serde_json::to_string(&entry).unwrap_or_default());
            on_epoch(&entry, model);
            logs.push(entry);
        }
        if !model.is_finite() {
            return Err(Error::NonFinite {
                epoch: cfg.epochs.saturating_sub(1),
                batch: steps - 1,
            });
        }
        Ok(logs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphTag, Vocab};
    use crate::model::Table;
    use rand::Rng;

    #[test]
    fn confidence_cases() {
        assert_eq!(confidence(0.7, 0.5), 0.7);
        assert_eq!(confidence(0.3, 0.5), 0.0);
        for p in [0.0, 0.1, 0.5, 0.99, 1.0] {
            assert_eq!(confidence(p, 0.0), p);
        }
    }

    fn zero_model() -> EmbeddingModel {
        let mut m = EmbeddingModel::init(ModelKind::DistMult, 4, 4, 2, 0).unwrap();
        for s in m.all_slots().collect::<Vec<_>>() {
            m.params_mut(s).iter_mut().for_each(|v| *v = 0.0);
        }
        m
    }

    #[test]
    fn target_loss_at_half_probability() {
        let m = zero_model();
        let mut buf = GradientBuffer::new();
        let (loss, w) = target_loss(
            &m,
            &Triplet::new(0, 0, 1),
            &[Triplet::new(0, 0, 2)],
            Gate::Threshold(0.5),
            &mut buf,
        );
        assert_eq!(w, 0.5);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn gated_positive_contributes_nothing() {
        let mut m = zero_model();
        // push P(s1) to sigmoid(-0.4) ~ 0.40
        m.params_mut(Slot::entity(0))[0] = 1.0;
        m.params_mut(Slot::relation(0))[0] = 1.0;
        m.params_mut(Slot::entity(1))[0] = -0.4;
        let t = Triplet::new(0, 0, 1);
        assert!(m.probability(&t) < 0.5);
        let mut buf = GradientBuffer::new();
        let (loss, w) = target_loss(&m, &t, &[Triplet::new(0, 0, 2)], Gate::Threshold(0.5), &mut buf);
        assert_eq!((loss, w), (0.0, 0.0));
        assert!(buf.is_empty());
    }

    #[test]
    fn external_loss_at_half_probability() {
        let m = zero_model();
        let negs = NegativeBatch {
            conventional: vec![Triplet::new(0, 0, 2)],
            relation_replaced: vec![Triplet::new(0, 1, 1)],
            entity_replaced: vec![Triplet::new(2, 0, 3)],
        };
        let mut buf = GradientBuffer::new();
        let loss = external_loss(&m, &Triplet::new(0, 0, 1), &negs, &mut buf);
        assert!((loss - 2.772588722239781).abs() < 1e-12);
        let only_pos = external_loss(&m, &Triplet::new(0, 0, 1), &NegativeBatch::default(), &mut buf);
        assert!((only_pos - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn negative_weight_equals_source_confidence() {
        let m = EmbeddingModel::init(ModelKind::DistMult, 6, 5, 1, 3).unwrap();
        let pos = Triplet::new(0, 0, 1);
        let neg = Triplet::new(0, 0, 2);
        let p = m.probability(&pos);
        let theta = p.min(0.5) * 0.5;
        let mut buf = GradientBuffer::new();
        let (_, w) = target_loss(&m, &pos, &[neg], Gate::Threshold(theta), &mut buf);
        assert_eq!(w, p);
        // gradient on the negative's object slot is w * P(neg) * d score / d o
        let mut direct = GradientBuffer::new();
        m.accumulate_score_grad(&neg, p * sigmoid_exact(m.score(&neg)), &mut direct);
        assert_eq!(buf.get(&Slot::entity(2)), direct.get(&Slot::entity(2)));
    }

    fn tiny_graphs() -> (KnowledgeGraph, KnowledgeGraph) {
        let ents = Vocab::from_names(0, (0..12).map(|i| format!("e{i}")));
        let mut rng = stream(5, 0);
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for _ in 0..40 {
            t1.push(Triplet::new(
                rng.random_range(0..8),
                rng.random_range(0..2),
                rng.random_range(0..8),
            ));
            t2.push(Triplet::new(
                rng.random_range(4..12),
                2 + rng.random_range(0..2),
                rng.random_range(4..12),
            ));
        }
        let g1 = KnowledgeGraph::from_triplets(
            GraphTag::Target,
            Vocab::from_names(0, (0..8).map(|i| format!("e{i}"))),
            Vocab::from_names(0, ["a", "b"]),
            t1,
        )
        .unwrap();
        let g2 = KnowledgeGraph::from_triplets(GraphTag::External, ents, Vocab::from_names(2, ["c", "d"]), t2).unwrap();
        (g1, g2)
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (g1, g2) = tiny_graphs();
        let data = TrainingData {
            target: &g1,
            external: Some(&g2),
        };
        let cfg = TrainerConfig {
            learning_rate: 0.0,
            epochs: 1,
            batch_size: 8,
            ..TrainerConfig::default()
        };
        let out = train(&data, &cfg).unwrap();
        let init = EmbeddingModel::init(cfg.model, cfg.dim, 12, 4, cfg.seed).unwrap();
        assert_eq!(out.model, init);
    }

    #[test]
    fn training_is_deterministic_across_thread_counts() {
        let (g1, g2) = tiny_graphs();
        let data = TrainingData {
            target: &g1,
            external: Some(&g2),
        };
        let cfg = TrainerConfig {
            epochs: 3,
            batch_size: 8,
            dim: 8,
            ..TrainerConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        let c = train(
            &data,
            &TrainerConfig {
                threads: 3,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.model, c.model);
        assert_eq!(a.log, c.log);
    }

    #[test]
    fn zero_lambda_leaves_external_only_slots_untouched() {
        let (g1, g2) = tiny_graphs();
        let data = TrainingData {
            target: &g1,
            external: Some(&g2),
        };
        let cfg = TrainerConfig {
            lambda: 0.0,
            epochs: 2,
            batch_size: 8,
            dim: 8,
            ..TrainerConfig::default()
        };
        let out = train(&data, &cfg).unwrap();
        let init = EmbeddingModel::init(cfg.model, cfg.dim, 12, 4, cfg.seed).unwrap();
        // external relations 2 and 3 only receive external gradients
        for r in [2, 3] {
            let s = Slot::relation(r);
            assert_eq!(out.model.params(s), init.params(s));
        }
        assert_eq!(out.model.width(Table::Relation), 8);
    }

    #[test]
    fn confidence_with_transe_is_rejected() {
        let cfg = TrainerConfig {
            model: ModelKind::TransE,
            ..TrainerConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let ok = TrainerConfig {
            confidence: false,
            ..cfg
        };
        ok.validate().unwrap();
    }

    #[test]
    fn adam_only_tracks_touched_slots() {
        let mut m = zero_model();
        let mut g = GradientBuffer::new();
        g.row_mut(Slot::entity(1), 4)[0] = 1.0;
        let mut adam = Adam::default();
        adam.apply(&mut m, &g, 0.1);
        assert_eq!(adam.tracked_slots(), 1);
        // first bias-corrected step moves by lr * sign(g)
        assert!((m.params(Slot::entity(1))[0] + 0.1).abs() < 1e-6);
        assert_eq!(m.params(Slot::entity(1))[1], 0.0);
    }
}
