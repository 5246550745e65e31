//! Triplet storage: interned vocabularies, deduplicated triplet lists and the
//! per-relation entity-pair index used by cross-graph sampling.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triplet {
    pub fn new(subject: u32, relation: u32, object: u32) -> Self {
        Triplet {
            subject: EntityId(subject),
            relation: RelationId(relation),
            object: EntityId(object),
        }
    }

    pub fn pair(&self) -> (EntityId, EntityId) {
        (self.subject, self.object)
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject.0, self.relation.0, self.object.0)
    }
}

/// Which side of the validation problem a graph plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphTag {
    /// The noisy graph under validation.
    Target,
    /// The trusted graph supplying validation signal.
    External,
}

impl fmt::Display for GraphTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphTag::Target => f.write_str("target"),
            GraphTag::External => f.write_str("external"),
        }
    }
}

/// Dense string interner. Ids start at `offset` and are contiguous.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    offset: u32,
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_offset(offset: u32) -> Self {
        Vocab {
            offset,
            ..Self::default()
        }
    }

    pub fn from_names<I, S>(offset: u32, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::with_offset(offset);
        for n in names {
            v.intern(&n.into());
        }
        v
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.offset + self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        id.checked_sub(self.offset)
            .and_then(|i| self.names.get(i as usize))
            .map(String::as_str)
    }

    pub fn contains_id(&self, id: u32) -> bool {
        id >= self.offset && ((id - self.offset) as usize) < self.names.len()
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// One past the largest id.
    pub fn end(&self) -> u32 {
        self.offset + self.names.len() as u32
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> + '_ {
        self.names
            .iter()
            .enumerate()
            .map(move |(i, n)| (self.offset + i as u32, n.as_str()))
    }
}

/// An immutable set of triplets plus the indices needed by sampling.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    tag: GraphTag,
    entities: Vocab,
    relations: Vocab,
    triplets: Vec<Triplet>,
    exists: HashSet<Triplet>,
    // indexed by relation id minus the relation vocabulary offset
    pairs_by_relation: Vec<IndexSet<(EntityId, EntityId)>>,
    duplicates: usize,
}

impl KnowledgeGraph {
    /// Builds a graph from already-resolved ids. Duplicates are dropped.
    pub fn from_triplets(
        tag: GraphTag,
        entities: Vocab,
        relations: Vocab,
        triplets: impl IntoIterator<Item = Triplet>,
    ) -> Result<Self> {
        let mut g = KnowledgeGraph {
            tag,
            pairs_by_relation: vec![IndexSet::new(); relations.len()],
            entities,
            relations,
            triplets: Vec::new(),
            exists: HashSet::new(),
            duplicates: 0,
        };
        for t in triplets {
            g.check_ids(&t)?;
            g.insert(t);
        }
        Ok(g)
    }

    /// Interns surface strings in first-occurrence order.
    pub fn from_named<I, S>(tag: GraphTag, triplets: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut ids = Vec::new();
        for (s, r, o) in triplets {
            let s = entities.intern(s.as_ref().trim());
            let r = relations.intern(r.as_ref().trim());
            let o = entities.intern(o.as_ref().trim());
            ids.push(Triplet::new(s, r, o));
        }
        Self::from_triplets(tag, entities, relations, ids).expect("interned ids are valid")
    }

    /// Reads a three-column TSV file. Files ending in `.gz` are decompressed.
    pub fn ingest(path: impl AsRef<Path>, tag: GraphTag) -> Result<Self> {
        let path = path.as_ref();
        let reader = open_text(path)?;
        let g = Self::ingest_reader(reader, path, tag)?;
        if g.duplicates > 0 {
            log::info!("{}: dropped {} duplicate triplets", path.display(), g.duplicates);
        }
        Ok(g)
    }

    pub fn ingest_reader(reader: impl BufRead, path: &Path, tag: GraphTag) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let Some(fields) = parse_row::<3>(&line, path, n + 1)? else {
                continue;
            };
            rows.push((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned()));
        }
        if rows.is_empty() {
            return Err(Error::EmptyGraph(path.display().to_string()));
        }
        Ok(Self::from_named(tag, rows))
    }

    fn check_ids(&self, t: &Triplet) -> Result<()> {
        for e in [t.subject, t.object] {
            if !self.entities.contains_id(e.0) {
                return Err(Error::UnknownEntity(e.0.to_string()));
            }
        }
        if !self.relations.contains_id(t.relation.0) {
            return Err(Error::UnknownRelation(t.relation.0.to_string()));
        }
        Ok(())
    }

    fn insert(&mut self, t: Triplet) -> bool {
        if !self.exists.insert(t) {
            self.duplicates += 1;
            return false;
        }
        self.triplets.push(t);
        let slot = (t.relation.0 - self.relations.offset()) as usize;
        self.pairs_by_relation[slot].insert(t.pair());
        true
    }

    /// Returns a copy of this graph with `extra` appended (duplicates dropped).
    pub fn with_triplets(&self, extra: impl IntoIterator<Item = Triplet>) -> Result<Self> {
        let mut g = self.clone();
        for t in extra {
            g.check_ids(&t)?;
            g.insert(t);
        }
        Ok(g)
    }

    /// Keeps only the given triplets, preserving vocabularies.
    pub fn restricted_to(&self, keep: impl IntoIterator<Item = Triplet>) -> Result<Self> {
        Self::from_triplets(self.tag, self.entities.clone(), self.relations.clone(), keep)
    }

    pub fn tag(&self) -> GraphTag {
        self.tag
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.exists.contains(t)
    }

    pub fn entity_pairs(&self, r: RelationId) -> Result<&IndexSet<(EntityId, EntityId)>> {
        if !self.relations.contains_id(r.0) {
            return Err(Error::UnknownRelation(r.0.to_string()));
        }
        Ok(&self.pairs_by_relation[(r.0 - self.relations.offset()) as usize])
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> + '_ {
        (self.relations.offset()..self.relations.end()).map(RelationId)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    /// Resolves a triplet given by surface strings.
    pub fn lookup(&self, s: &str, r: &str, o: &str) -> Option<Triplet> {
        Some(Triplet {
            subject: self.entity_id(s)?,
            relation: self.relation_id(r)?,
            object: self.entity_id(o)?,
        })
    }

    /// Writes the triplets as `s\tr\to` rows in graph order.
    pub fn write_tsv(&self, mut w: impl std::io::Write) -> Result<()> {
        for t in &self.triplets {
            let (s, r, o) = self.describe(t);
            writeln!(w, "{s}\t{r}\t{o}").map_err(|e| Error::io("writing triplets", e))?;
        }
        Ok(())
    }

    pub fn describe(&self, t: &Triplet) -> (String, String, String) {
        let name = |v: &Vocab, id: u32| v.name(id).map_or_else(|| format!("#{id}"), str::to_owned);
        (
            name(&self.entities, t.subject.0),
            name(&self.relations, t.relation.0),
            name(&self.entities, t.object.0),
        )
    }
}

/// Opens a text file, transparently decoding gzip when the name ends in `.gz`.
pub(crate) fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let inner: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(flate2::read::GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

/// Splits one tab-separated row into exactly `N` trimmed, non-empty fields.
/// Blank lines yield `None`.
pub(crate) fn parse_row<'a, const N: usize>(
    line: &'a str,
    path: &Path,
    line_no: usize,
) -> Result<Option<[&'a str; N]>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != N {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: format!("expected {N} tab-separated fields, found {}", fields.len()),
        });
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: "empty field".into(),
        });
    }
    let mut out = [""; N];
    out.copy_from_slice(&fields);
    Ok(Some(out))
}
