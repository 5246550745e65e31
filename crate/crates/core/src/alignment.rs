//! Exact-string entity alignment between the target and external graphs.
//!
//! Target entities keep their ids. External entities that match a target
//! entity (exactly, or through one alias hop) take the target id; everything
//! else is appended after the target block. Relations are never merged: the
//! external relation block starts right after the target relations.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{open_text, parse_row, EntityId, GraphTag, KnowledgeGraph, Triplet, Vocab};

/// Symmetric alias links: canonical name to its known aliases.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    aliases: BTreeMap<String, Vec<String>>,
    canonical_of: HashMap<String, String>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut t = AliasTable::new();
        for (c, a) in pairs {
            t.insert(c.as_ref(), a.as_ref())?;
        }
        Ok(t)
    }

    /// Reads `canonical\talias` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = open_text(path)?;
        let mut t = AliasTable::new();
        for (n, line) in std::io::BufRead::lines(reader).enumerate() {
            let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            if let Some([c, a]) = parse_row::<2>(&line, path, n + 1)? {
                t.insert(c, a)?;
            }
        }
        Ok(t)
    }

    pub fn insert(&mut self, canonical: &str, alias: &str) -> Result<()> {
        if canonical == alias {
            return Ok(());
        }
        if let Some(prev) = self.canonical_of.get(alias) {
            if prev == canonical {
                return Ok(());
            }
            return Err(Error::AliasConflict {
                alias: alias.to_owned(),
                first: prev.clone(),
                second: canonical.to_owned(),
            });
        }
        self.canonical_of.insert(alias.to_owned(), canonical.to_owned());
        self.aliases
            .entry(canonical.to_owned())
            .or_default()
            .push(alias.to_owned());
        Ok(())
    }

    /// Names one alias hop away from `name`, in either direction.
    pub fn linked<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a str> + 'a {
        let forward = self.aliases.get(name).into_iter().flatten().map(String::as_str);
        let backward = self.canonical_of.get(name).map(String::as_str);
        forward.chain(backward)
    }

    pub fn len(&self) -> usize {
        self.canonical_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical_of.is_empty()
    }
}

/// Where a shared entity id came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Only in the target graph.
    Target,
    /// Only in the external graph.
    External,
    /// Present in both graphs under one id.
    Shared,
}

/// Total map from external entity ids into the shared id space.
#[derive(Debug, Clone)]
pub struct AlignmentMap {
    to_shared: Vec<EntityId>,
    target_entities: u32,
    target_relations: u32,
    shared: Vocab,
    overlapping: usize,
}

impl AlignmentMap {
    pub fn shared_id(&self, external: EntityId) -> Option<EntityId> {
        self.to_shared.get(external.index()).copied()
    }

    pub fn overlapping(&self) -> usize {
        self.overlapping
    }

    /// `(external id, shared target id)` for every overlapping entity.
    pub fn overlapping_pairs(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.to_shared
            .iter()
            .enumerate()
            .filter(|(_, s)| s.0 < self.target_entities)
            .map(|(e, &s)| (EntityId(e as u32), s))
    }

    /// Shared entity vocabulary: target names first, then external-only names.
    pub fn shared_entities(&self) -> &Vocab {
        &self.shared
    }

    pub fn num_shared_entities(&self) -> usize {
        self.shared.len()
    }

    /// First relation id of the external block.
    pub fn relation_offset(&self) -> u32 {
        self.target_relations
    }

    pub fn origin(&self, id: EntityId) -> Origin {
        if id.0 >= self.target_entities {
            Origin::External
        } else if self.to_shared.contains(&id) {
            Origin::Shared
        } else {
            Origin::Target
        }
    }

    /// Keeps `ceil(fraction * overlapping)` alignments chosen uniformly under
    /// `seed`; dropped external entities get fresh ids after the target block.
    pub fn subsample(&self, fraction: f64, seed: u64, external: &Vocab) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!(
                "overlap fraction must be in (0, 1], got {fraction}"
            )));
        }
        let mapped: Vec<usize> = self.overlapping_pairs().map(|(e, _)| e.index()).collect();
        let keep_n = (fraction * mapped.len() as f64).ceil() as usize;
        let keep_n = keep_n.min(mapped.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![false; self.to_shared.len()];
        for i in index::sample(&mut rng, mapped.len(), keep_n) {
            keep[mapped[i]] = true;
        }
        let decisions = self
            .to_shared
            .iter()
            .enumerate()
            .map(|(e, &s)| (s.0 < self.target_entities && keep[e]).then_some(s))
            .collect();
        Ok(self.rebuild(decisions, external))
    }

    fn rebuild(&self, decisions: Vec<Option<EntityId>>, external: &Vocab) -> Self {
        let target_names = &self.shared.names()[..self.target_entities as usize];
        build_map(target_names, external, decisions, self.target_relations)
    }
}

fn build_map(
    target_names: &[String],
    external: &Vocab,
    decisions: Vec<Option<EntityId>>,
    target_relations: u32,
) -> AlignmentMap {
    let target_entities = target_names.len() as u32;
    let mut shared = Vocab::from_names(0, target_names.iter().cloned());
    let mut to_shared = Vec::with_capacity(decisions.len());
    let mut overlapping = 0;
    for ((_, name), decision) in external.iter().zip(decisions) {
        match decision {
            Some(id) => {
                overlapping += 1;
                to_shared.push(id);
            }
            None => {
                // an unaligned external name may still collide with a target name
                let mut fresh = name.to_owned();
                while shared.get(&fresh).is_some() {
                    fresh.push_str("@external");
                }
                to_shared.push(EntityId(shared.intern(&fresh)));
            }
        }
    }
    AlignmentMap {
        to_shared,
        target_entities,
        target_relations,
        shared,
        overlapping,
    }
}

/// Aligns external entities onto target entities by exact name or one alias
/// hop. Exact matches are claimed first; an alias match never maps a second
/// external entity onto an already-claimed target id.
pub fn align(target: &KnowledgeGraph, external: &KnowledgeGraph, aliases: &AliasTable) -> AlignmentMap {
    let tv = target.entities();
    let xv = external.entities();
    let mut decisions: Vec<Option<EntityId>> = vec![None; xv.len()];
    let mut claimed = vec![false; tv.len()];

    for (i, (_, name)) in xv.iter().enumerate() {
        if let Some(id) = tv.get(name) {
            decisions[i] = Some(EntityId(id));
            claimed[id as usize] = true;
        }
    }
    if !aliases.is_empty() {
        for (i, (_, name)) in xv.iter().enumerate() {
            if decisions[i].is_some() {
                continue;
            }
            let hit = aliases
                .linked(name)
                .filter_map(|n| tv.get(n))
                .filter(|&id| !claimed[id as usize])
                .min();
            if let Some(id) = hit {
                decisions[i] = Some(EntityId(id));
                claimed[id as usize] = true;
            }
        }
    }
    build_map(tv.names(), xv, decisions, target.relations().len() as u32)
}

/// Rewrites the external graph into the shared id space.
pub fn remap(external: &KnowledgeGraph, map: &AlignmentMap) -> Result<KnowledgeGraph> {
    let xr = external.relations();
    let offset = map.relation_offset();
    let relations = Vocab::from_names(offset, xr.names().iter().cloned());
    let rel_shift = |r: u32| offset + (r - xr.offset());
    let mut out = Vec::with_capacity(external.len());
    for t in external.triplets() {
        let s = map.shared_id(t.subject).ok_or(Error::UnmappedEntity(t.subject.0))?;
        let o = map.shared_id(t.object).ok_or(Error::UnmappedEntity(t.object.0))?;
        out.push(Triplet::new(s.0, rel_shift(t.relation.0), o.0));
    }
    KnowledgeGraph::from_triplets(GraphTag::External, map.shared_entities().clone(), relations, out)
}
