//! Seeded synthetic target/external graph pairs with injected errors.
//!
//! Entities carry a hidden type and group. Every latent relation links a head
//! type to a tail type and a tail group at a fixed cyclic distance from the
//! head group, and no two latent relations share that pattern, even when one
//! is read backwards. A random
//! subset of the admissible pairs of each relation forms the true facts of
//! the world, and both graphs sample from those facts. The target graph
//! observes some latent relations, the external graph others (a few in
//! common, under different names), and entity popularity is Zipf-like and
//! independent per graph, so many entities that are rare in the target are
//! well covered externally.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{inject_errors, EvaluationSet};
use crate::graph::{GraphTag, KnowledgeGraph, Triplet, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub target_entities: usize,
    pub external_entities: usize,
    /// Entities present in both graphs.
    pub overlap: usize,
    pub target_relations: usize,
    pub external_relations: usize,
    /// Latent relations observed by both graphs.
    pub shared_relations: usize,
    /// Target size including injected errors.
    pub target_triplets: usize,
    pub external_triplets: usize,
    pub error_rate: f64,
    pub types: usize,
    pub groups: usize,
    /// Zipf exponent of entity popularity.
    pub popularity_exponent: f64,
    /// Fraction of admissible pairs that are true facts.
    pub fact_density: f64,
    /// Fraction of facts that ignore the group rule.
    pub exception_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            target_entities: 300,
            external_entities: 500,
            overlap: 120,
            target_relations: 10,
            external_relations: 15,
            shared_relations: 5,
            target_triplets: 3000,
            external_triplets: 5000,
            error_rate: 0.05,
            types: 3,
            groups: 8,
            popularity_exponent: 1.0,
            fact_density: 0.3,
            exception_rate: 0.0,
            seed: 0,
        }
    }
}

/// Hidden rule of a latent relation: heads of `head_type`, tails of
/// `tail_type` whose group differs from the head's by `±shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentRelation {
    pub head_type: usize,
    pub tail_type: usize,
    pub shift: usize,
}

/// A generated fixture.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    /// Target graph before error injection.
    pub clean_target: KnowledgeGraph,
    /// Target graph with the injected errors; this is what gets validated.
    pub target: KnowledgeGraph,
    pub external: KnowledgeGraph,
    /// Sampled clean triplets (+1) and their corruptions (-1), target ids.
    pub eval: EvaluationSet,
    /// Hidden type and group of every world entity; entity `entity_{i}`
    /// has world id `i`.
    pub entity_types: Vec<usize>,
    pub entity_groups: Vec<usize>,
    /// Rule of latent relation `i`, named `target_rel_{i}` or `external_rel_{i}`.
    pub relations: Vec<LatentRelation>,
}

struct World {
    types: Vec<usize>,
    groups: Vec<usize>,
    relations: Vec<LatentRelation>,
    groups_n: usize,
    /// `(head, relation, tail)` world facts.
    facts: HashSet<(usize, usize, usize)>,
}

impl World {
    fn admits(&self, r: &LatentRelation, h: usize, t: usize) -> bool {
        if self.types[h] != r.head_type || self.types[t] != r.tail_type {
            return false;
        }
        let d = (self.groups[t] + self.groups_n - self.groups[h]) % self.groups_n;
        d == r.shift || (self.groups_n - d) % self.groups_n == r.shift
    }
}

fn popularity<R: Rng>(n: usize, exponent: f64, rng: &mut R) -> Vec<f64> {
    let mut ranks: Vec<usize> = (1..=n).collect();
    ranks.shuffle(rng);
    ranks.into_iter().map(|r| (r as f64).powf(-exponent)).collect()
}

fn weighted_pick<R: Rng>(candidates: &[usize], weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = candidates.iter().map(|&c| weights[c]).sum();
    if candidates.is_empty() || total <= 0.0 {
        return None;
    }
    let mut x = rng.random_range(0.0..total);
    for &c in candidates {
        x -= weights[c];
        if x < 0.0 {
            return Some(c);
        }
    }
    candidates.last().copied()
}

/// Samples `count` distinct facts over `entities` (world ids, listed in the
/// graph's id order) for the given latent relations.
#[allow(clippy::too_many_arguments)]
fn sample_facts<R: Rng>(
    world: &World,
    entities: &[usize],
    relations: &[usize],
    weights: &[f64],
    count: usize,
    exception_rate: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize, usize)>> {
    // local index -> world id, and per-type candidate lists of local indices
    let by_type: Vec<Vec<usize>> = (0..=world.types.iter().copied().max().unwrap_or(0))
        .map(|ty| {
            (0..entities.len())
                .filter(|&i| world.types[entities[i]] == ty)
                .collect()
        })
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > count * 200 {
            return Err(Error::InvalidArgument(format!(
                "synthetic world too small: produced {} of {count} facts",
                out.len()
            )));
        }
        let ri = relations[rng.random_range(0..relations.len())];
        let rel = world.relations[ri];
        let Some(h) = weighted_pick(&by_type[rel.head_type], weights, rng) else {
            continue;
        };
        let tails: Vec<usize> = if rng.random_bool(exception_rate) {
            by_type[rel.tail_type].clone()
        } else {
            by_type[rel.tail_type]
                .iter()
                .copied()
                .filter(|&t| world.facts.contains(&(entities[h], ri, entities[t])))
                .collect()
        };
        let Some(t) = weighted_pick(&tails, weights, rng) else {
            continue;
        };
        if h != t && seen.insert((h, ri, t)) {
            out.push((h, ri, t));
        }
    }
    Ok(out)
}

/// Builds the fixture for `config`.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticPair> {
    let c = config;
    if c.overlap > c.target_entities || c.overlap > c.external_entities {
        return Err(Error::Config("overlap exceeds a graph's entity count".into()));
    }
    if c.shared_relations > c.target_relations || c.shared_relations > c.external_relations {
        return Err(Error::Config("shared relations exceed a graph's relation count".into()));
    }
    if c.types == 0 || c.groups == 0 {
        return Err(Error::Config("types and groups must be positive".into()));
    }
    let n_world = c.target_entities + c.external_entities - c.overlap;
    let n_latent = c.target_relations + c.external_relations - c.shared_relations;
    // unordered type pairs, so no relation is the reverse of another
    let mut patterns: Vec<LatentRelation> = (0..c.types)
        .flat_map(|h| (h..c.types).map(move |t| (h, t)))
        .flat_map(|(head_type, tail_type)| {
            (0..=c.groups / 2).map(move |shift| LatentRelation {
                head_type,
                tail_type,
                shift,
            })
        })
        .collect();
    if patterns.len() < n_latent {
        return Err(Error::Config(format!(
            "{n_latent} relations need more than {} type/group patterns",
            patterns.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    patterns.shuffle(&mut rng);
    patterns.truncate(n_latent);
    for p in &mut patterns {
        if rng.random_bool(0.5) {
            std::mem::swap(&mut p.head_type, &mut p.tail_type);
        }
    }
    let mut world = World {
        types: (0..n_world).map(|_| rng.random_range(0..c.types)).collect(),
        groups: (0..n_world).map(|_| rng.random_range(0..c.groups)).collect(),
        relations: patterns,
        groups_n: c.groups,
        facts: HashSet::new(),
    };
    for ri in 0..n_latent {
        let rel = world.relations[ri];
        for h in 0..n_world {
            for t in 0..n_world {
                if h != t && world.admits(&rel, h, t) && rng.random_bool(c.fact_density) {
                    world.facts.insert((h, ri, t));
                }
            }
        }
    }

    // world ids: [target-only | overlap | external-only]
    let target_only = c.target_entities - c.overlap;
    let mut target_ents: Vec<usize> = (0..c.target_entities).collect();
    let mut external_ents: Vec<usize> = (target_only..n_world).collect();
    target_ents.shuffle(&mut rng);
    external_ents.shuffle(&mut rng);

    // latent relation ids: [target-only | shared | external-only]
    let t_only = c.target_relations - c.shared_relations;
    let target_rels: Vec<usize> = (0..c.target_relations).collect();
    let external_rels: Vec<usize> = (t_only..n_latent).collect();

    let n_errors = (c.error_rate * c.target_triplets as f64).round() as usize;
    let w1 = popularity(target_ents.len(), c.popularity_exponent, &mut rng);
    let w2 = popularity(external_ents.len(), c.popularity_exponent, &mut rng);
    let f1 = sample_facts(
        &world,
        &target_ents,
        &target_rels,
        &w1,
        c.target_triplets - n_errors,
        c.exception_rate,
        &mut rng,
    )?;
    let f2 = sample_facts(
        &world,
        &external_ents,
        &external_rels,
        &w2,
        c.external_triplets,
        c.exception_rate,
        &mut rng,
    )?;

    let ent_names = |ids: &[usize]| Vocab::from_names(0, ids.iter().map(|e| format!("entity_{e}")));
    let clean_target = KnowledgeGraph::from_triplets(
        GraphTag::Target,
        ent_names(&target_ents),
        Vocab::from_names(0, target_rels.iter().map(|r| format!("target_rel_{r}"))),
        f1.iter().map(|&(h, r, t)| Triplet::new(h as u32, r as u32, t as u32)),
    )?;
    let external = KnowledgeGraph::from_triplets(
        GraphTag::External,
        ent_names(&external_ents),
        Vocab::from_names(0, external_rels.iter().map(|r| format!("external_rel_{r}"))),
        f2.iter()
            .map(|&(h, r, t)| Triplet::new(h as u32, (r - t_only) as u32, t as u32)),
    )?;
    let (sources, errors) = inject_errors(&clean_target, n_errors, &mut rng)?;
    let target = clean_target.with_triplets(errors.iter().copied())?;
    let eval = EvaluationSet::from_parts(&sources, &errors)?;
    Ok(SyntheticPair {
        clean_target,
        target,
        external,
        eval,
        entity_types: world.types,
        entity_groups: world.groups,
        relations: world.relations,
    })
}
