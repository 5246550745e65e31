//! Negative sampling.
//!
//! Conventional negatives corrupt the subject or object of an observed
//! triplet (local closed-world assumption). Cross-graph negatives come from
//! relation pairs `(r1, r2)` with no overlapping entity pair: an external
//! triplet either takes a target relation from `N(r2)` (relation
//! replacement), or keeps its relation and borrows a target entity pair that
//! satisfies some `r1` in `N(r2)` (entity replacement).

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triplet};

/// Rejection-sampling budget per generated negative.
pub const MAX_RETRIES: usize = 100;

/// `O(r1, r2)`: entity pairs observed with `r1` in the target graph and
/// with `r2` in the external graph. Both graphs must share entity ids.
pub fn overlapping_pairs(
    r1: RelationId,
    r2: RelationId,
    target: &KnowledgeGraph,
    external: &KnowledgeGraph,
) -> Result<Vec<(EntityId, EntityId)>> {
    let a = target.entity_pairs(r1)?;
    let b = external.entity_pairs(r2)?;
    Ok(a.iter().filter(|p| b.contains(*p)).copied().collect())
}

fn pairs_disjoint(r1: RelationId, r2: RelationId, target: &KnowledgeGraph, external: &KnowledgeGraph) -> bool {
    let a = target.entity_pairs(r1).expect("relation from target vocabulary");
    let b = external.entity_pairs(r2).expect("relation from external vocabulary");
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    !small.iter().any(|p| large.contains(p))
}

/// Cross-graph negative relation sets `N(r)`, kept for both directions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NegativeRelationIndex {
    negatives: BTreeMap<RelationId, Vec<RelationId>>,
    // target relations in N(r2) that have at least one entity pair
    entity_sources: BTreeMap<RelationId, Vec<RelationId>>,
}

impl NegativeRelationIndex {
    pub fn build(target: &KnowledgeGraph, external: &KnowledgeGraph) -> Self {
        let mut negatives: BTreeMap<RelationId, Vec<RelationId>> = BTreeMap::new();
        for r in target.relation_ids().chain(external.relation_ids()) {
            negatives.insert(r, Vec::new());
        }
        for r1 in target.relation_ids() {
            for r2 in external.relation_ids() {
                if pairs_disjoint(r1, r2, target, external) {
                    negatives.get_mut(&r1).unwrap().push(r2);
                    negatives.get_mut(&r2).unwrap().push(r1);
                }
            }
        }
        let entity_sources = external
            .relation_ids()
            .map(|r2| {
                let eligible = negatives[&r2]
                    .iter()
                    .copied()
                    .filter(|&r1| target.entity_pairs(r1).is_ok_and(|p| !p.is_empty()))
                    .collect();
                (r2, eligible)
            })
            .collect();
        NegativeRelationIndex {
            negatives,
            entity_sources,
        }
    }

    /// `N(r)`, sorted by id. Unknown relations have an empty set.
    pub fn negatives(&self, r: RelationId) -> &[RelationId] {
        self.negatives.get(&r).map_or(&[], Vec::as_slice)
    }

    pub fn are_negative(&self, a: RelationId, b: RelationId) -> bool {
        self.negatives(a).binary_search(&b).is_ok()
    }

    pub fn knows(&self, r: RelationId) -> bool {
        self.negatives.contains_key(&r)
    }

    fn is_external(&self, r: RelationId) -> bool {
        self.entity_sources.contains_key(&r)
    }

    /// Total number of `(r1, r2)` negative pairs.
    pub fn pair_count(&self) -> usize {
        self.entity_sources.keys().map(|r2| self.negatives[r2].len()).sum()
    }
}

pub fn build_negative_relation_index(target: &KnowledgeGraph, external: &KnowledgeGraph) -> NegativeRelationIndex {
    NegativeRelationIndex::build(target, external)
}

/// Membership against every graph a negative must avoid.
#[derive(Clone, Copy)]
pub struct Observed<'a> {
    graphs: &'a [&'a KnowledgeGraph],
}

impl<'a> Observed<'a> {
    pub fn new(graphs: &'a [&'a KnowledgeGraph]) -> Self {
        Observed { graphs }
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.graphs.iter().any(|g| g.contains(t))
    }
}

/// `k` subject-or-object corruptions of `t`, none of them observed.
pub fn corrupt_conventional<R: Rng + ?Sized>(
    t: &Triplet,
    k: usize,
    num_entities: u32,
    observed: Observed<'_>,
    rng: &mut R,
) -> Result<Vec<Triplet>> {
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        out.push(corrupt_once(t, num_entities, observed, rng)?);
    }
    Ok(out)
}

pub(crate) fn corrupt_once<R: Rng + ?Sized>(
    t: &Triplet,
    num_entities: u32,
    observed: Observed<'_>,
    rng: &mut R,
) -> Result<Triplet> {
    for _ in 0..MAX_RETRIES {
        let e = EntityId(rng.random_range(0..num_entities));
        let mut c = *t;
        if rng.random_bool(0.5) {
            c.subject = e;
        } else {
            c.object = e;
        }
        if c != *t && !observed.contains(&c) {
            return Ok(c);
        }
    }
    Err(Error::Sampling(format!(
        "no unobserved corruption of {t} after {MAX_RETRIES} draws"
    )))
}

fn check_external(t: &Triplet, index: &NegativeRelationIndex) -> Result<()> {
    if index.is_external(t.relation) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "cross-graph negatives are drawn from external triplets only; {t} is not external"
        )))
    }
}

/// Swaps the relation of an external triplet for a uniformly drawn member of
/// `N(r2)`. `None` when no candidate exists.
pub fn replace_relation<R: Rng + ?Sized>(
    t: &Triplet,
    index: &NegativeRelationIndex,
    observed: Observed<'_>,
    rng: &mut R,
) -> Result<Option<Triplet>> {
    check_external(t, index)?;
    let candidates = index.negatives(t.relation);
    if candidates.is_empty() {
        return Ok(None);
    }
    for _ in 0..MAX_RETRIES {
        let r1 = candidates[rng.random_range(0..candidates.len())];
        let c = Triplet { relation: r1, ..*t };
        if !observed.contains(&c) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Keeps the relation of an external triplet and replaces its entity pair by
/// one pair drawn from a target relation in `N(r2)`. `None` when no target
/// relation in `N(r2)` has any pair.
pub fn replace_entities<R: Rng + ?Sized>(
    t: &Triplet,
    index: &NegativeRelationIndex,
    target: &KnowledgeGraph,
    observed: Observed<'_>,
    rng: &mut R,
) -> Result<Option<Triplet>> {
    check_external(t, index)?;
    let sources = &index.entity_sources[&t.relation];
    if sources.is_empty() {
        return Ok(None);
    }
    for _ in 0..MAX_RETRIES {
        let r1 = sources[rng.random_range(0..sources.len())];
        let pairs = target.entity_pairs(r1)?;
        let (s, o) = pairs[rng.random_range(0..pairs.len())];
        let c = Triplet {
            subject: s,
            relation: t.relation,
            object: o,
        };
        if !observed.contains(&c) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Negatives generated for one positive triplet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NegativeBatch {
    pub conventional: Vec<Triplet>,
    pub relation_replaced: Vec<Triplet>,
    pub entity_replaced: Vec<Triplet>,
}

impl NegativeBatch {
    pub fn iter(&self) -> impl Iterator<Item = &Triplet> {
        self.conventional
            .iter()
            .chain(&self.relation_replaced)
            .chain(&self.entity_replaced)
    }

    pub fn len(&self) -> usize {
        self.conventional.len() + self.relation_replaced.len() + self.entity_replaced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-positive negative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeCounts {
    pub conventional: usize,
    pub relation_replaced: usize,
    pub entity_replaced: usize,
}

impl Default for NegativeCounts {
    fn default() -> Self {
        NegativeCounts {
            conventional: 1,
            relation_replaced: 1,
            entity_replaced: 1,
        }
    }
}

/// Draws negatives for target and external positives over fixed graphs.
pub struct NegativeSampler<'a> {
    target: &'a KnowledgeGraph,
    index: Option<&'a NegativeRelationIndex>,
    graphs: Vec<&'a KnowledgeGraph>,
    num_entities: u32,
    counts: NegativeCounts,
}

impl<'a> NegativeSampler<'a> {
    /// `index` is `None` when cross-graph sampling is disabled.
    pub fn new(
        target: &'a KnowledgeGraph,
        external: Option<&'a KnowledgeGraph>,
        index: Option<&'a NegativeRelationIndex>,
        num_entities: u32,
        counts: NegativeCounts,
    ) -> Self {
        let mut graphs = vec![target];
        graphs.extend(external);
        NegativeSampler {
            target,
            index,
            graphs,
            num_entities,
            counts,
        }
    }

    fn observed(&self) -> Observed<'_> {
        Observed::new(&self.graphs)
    }

    pub fn for_target<R: Rng + ?Sized>(&self, t: &Triplet, rng: &mut R) -> Result<NegativeBatch> {
        Ok(NegativeBatch {
            conventional: corrupt_conventional(t, self.counts.conventional, self.num_entities, self.observed(), rng)?,
            ..NegativeBatch::default()
        })
    }

    pub fn for_external<R: Rng + ?Sized>(&self, t: &Triplet, rng: &mut R) -> Result<NegativeBatch> {
        let mut batch = NegativeBatch {
            conventional: corrupt_conventional(t, self.counts.conventional, self.num_entities, self.observed(), rng)?,
            ..NegativeBatch::default()
        };
        if let Some(index) = self.index {
            for _ in 0..self.counts.relation_replaced {
                if let Some(n) = replace_relation(t, index, self.observed(), rng)? {
                    batch.relation_replaced.push(n);
                }
            }
            for _ in 0..self.counts.entity_replaced {
                if let Some(n) = replace_entities(t, index, self.target, self.observed(), rng)? {
                    batch.entity_replaced.push(n);
                }
            }
        }
        Ok(batch)
    }
}
