//! Python bindings: graphs, alignment, training, validation and metrics.

use std::collections::BTreeMap;

use crossval::alignment::{align as align_graphs, remap, AliasTable, AlignmentMap};
use crossval::eval::{
    mean_filtered_rank, mean_raw_rank, precision_at as precision_at_k, recall_of_ranking, EvaluationSet, RankingReport,
};
use crossval::graph::{GraphTag, KnowledgeGraph, Triplet};
use crossval::negatives::NegativeRelationIndex;
use crossval::pipeline::{evaluate, prepare_graphs, train_prepared, Checkpoint, RunConfig};
use crossval::{Error, ErrorClass};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

create_exception!(
    crossval_py,
    CrossvalError,
    PyException,
    "Base class for library errors."
);
create_exception!(crossval_py, ConfigError, CrossvalError, "Invalid option or setting.");
create_exception!(
    crossval_py,
    DataError,
    CrossvalError,
    "Malformed or inconsistent input data."
);
create_exception!(crossval_py, NumericError, CrossvalError, "Training diverged.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.class() {
        ErrorClass::Config => ConfigError::new_err(msg),
        ErrorClass::Data => DataError::new_err(msg),
        ErrorClass::Numeric => NumericError::new_err(msg),
    }
}

type Named = (String, String, String);

fn parse_tag(tag: &str) -> PyResult<GraphTag> {
    match tag {
        "target" => Ok(GraphTag::Target),
        "external" => Ok(GraphTag::External),
        _ => Err(ConfigError::new_err(format!(
            "tag must be 'target' or 'external', got {tag:?}"
        ))),
    }
}

fn alias_table(aliases: Option<Vec<(String, String)>>) -> PyResult<AliasTable> {
    AliasTable::from_pairs(aliases.unwrap_or_default()).map_err(to_py)
}

/// A deduplicated set of `(subject, relation, object)` triplets.
#[pyclass(name = "KnowledgeGraph", module = "crossval_py", frozen)]
struct PyGraph {
    inner: KnowledgeGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (triplets, tag = "target"))]
    fn new(triplets: Vec<Named>, tag: &str) -> PyResult<Self> {
        let inner = KnowledgeGraph::from_named(parse_tag(tag)?, triplets.iter().map(|(s, r, o)| (s, r, o)));
        Ok(PyGraph { inner })
    }

    /// Reads a tab-separated file (optionally gzipped).
    #[staticmethod]
    #[pyo3(signature = (path, tag = "target"))]
    fn load(path: &str, tag: &str) -> PyResult<Self> {
        let inner = KnowledgeGraph::ingest(path, parse_tag(tag)?).map_err(to_py)?;
        Ok(PyGraph { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.inner.entities().len()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.inner.relations().len()
    }

    #[getter]
    fn duplicates_dropped(&self) -> usize {
        self.inner.duplicates_dropped()
    }

    fn entities(&self) -> Vec<String> {
        self.inner.entities().names().to_vec()
    }

    fn relations(&self) -> Vec<String> {
        self.inner.relations().names().to_vec()
    }

    fn triplets(&self) -> Vec<Named> {
        self.inner.triplets().iter().map(|t| self.inner.describe(t)).collect()
    }

    fn __contains__(&self, t: Named) -> bool {
        self.inner
            .lookup(&t.0, &t.1, &t.2)
            .is_some_and(|t| self.inner.contains(&t))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| to_py(Error::io(format!("creating {path}"), e)))?;
        self.inner.write_tsv(std::io::BufWriter::new(file)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeGraph({} triplets, {} entities, {} relations)",
            self.inner.len(),
            self.inner.entities().len(),
            self.inner.relations().len()
        )
    }
}

/// Entity alignment between a target and an external graph.
#[pyclass(name = "Alignment", module = "crossval_py", frozen)]
struct PyAlignment {
    map: AlignmentMap,
    target: KnowledgeGraph,
    external: KnowledgeGraph,
}

#[pymethods]
impl PyAlignment {
    /// Number of external entities matched to a target entity.
    #[getter]
    fn overlapping(&self) -> usize {
        self.map.overlapping()
    }

    /// Size of the shared entity space.
    #[getter]
    fn shared_entities(&self) -> usize {
        self.map.num_shared_entities()
    }

    /// `(target name, external name)` for every matched entity.
    fn pairs(&self) -> Vec<(String, String)> {
        self.map
            .overlapping_pairs()
            .map(|(t, x)| {
                (
                    self.target.entities().name(t.0).unwrap_or_default().to_owned(),
                    self.external.entities().name(x.0).unwrap_or_default().to_owned(),
                )
            })
            .collect()
    }

    /// Target relation paired with each of its cross-graph negative
    /// relations, both directions included.
    fn negative_relations(&self) -> PyResult<Vec<(String, String)>> {
        let remapped = remap(&self.external, &self.map).map_err(to_py)?;
        let index = NegativeRelationIndex::build(&self.target, &remapped);
        let mut out = Vec::new();
        for r in self.target.relation_ids() {
            let name = self.target.relations().name(r.0).unwrap_or_default();
            for n in index.negatives(r) {
                let other = remapped.relations().name(n.0).unwrap_or_default();
                out.push((name.to_owned(), other.to_owned()));
            }
        }
        Ok(out)
    }
}

/// Aligns entities by exact name, then through one alias hop.
#[pyfunction]
#[pyo3(signature = (target, external, aliases = None))]
fn align(target: &PyGraph, external: &PyGraph, aliases: Option<Vec<(String, String)>>) -> PyResult<PyAlignment> {
    let table = alias_table(aliases)?;
    Ok(PyAlignment {
        map: align_graphs(&target.inner, &external.inner, &table),
        target: target.inner.clone(),
        external: external.inner.clone(),
    })
}

fn option_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(b) = value.cast::<PyBool>() {
        return Ok(if b.is_true() { "on" } else { "off" }.to_owned());
    }
    if let Ok(items) = value.extract::<Vec<Bound<'_, PyAny>>>() {
        if !value.is_instance_of::<pyo3::types::PyString>() {
            let parts = items
                .iter()
                .map(|v| v.str().map(|s| s.to_string()))
                .collect::<PyResult<Vec<_>>>()?;
            return Ok(parts.join(","));
        }
    }
    Ok(value.str()?.to_string())
}

fn run_config(options: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(options) = options {
        for (k, v) in options.iter() {
            let key: String = k.extract()?;
            cfg.set(&key, &option_text(&v)?).map_err(to_py)?;
        }
    }
    cfg.resolved().map_err(to_py)
}

/// A trained model with the vocabularies needed to score named triplets.
#[pyclass(name = "Model", module = "crossval_py", frozen)]
struct PyModel {
    checkpoint: Checkpoint,
    vocab: KnowledgeGraph,
    log: Vec<BTreeMap<&'static str, f64>>,
}

impl PyModel {
    fn new(checkpoint: Checkpoint, log: Vec<BTreeMap<&'static str, f64>>) -> Self {
        let vocab = checkpoint.target_vocab();
        PyModel { checkpoint, vocab, log }
    }

    fn resolve(&self, t: &Named) -> PyResult<Triplet> {
        self.vocab
            .lookup(&t.0, &t.1, &t.2)
            .ok_or_else(|| DataError::new_err(format!("unknown entity or relation in {t:?}")))
    }

    fn resolve_all(&self, ts: &[Named]) -> PyResult<Vec<Triplet>> {
        ts.iter().map(|t| self.resolve(t)).collect()
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel::new(Checkpoint::load(path).map_err(to_py)?, Vec::new()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel::new(Checkpoint::from_json(text).map_err(to_py)?, Vec::new()))
    }

    fn to_json(&self) -> PyResult<String> {
        self.checkpoint.to_json().map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| to_py(Error::io(format!("writing {path}"), e)))
    }

    #[getter]
    fn kind(&self) -> String {
        self.checkpoint.model.kind().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.checkpoint.model.dim()
    }

    /// Per-epoch mean losses and gated share; empty for loaded models.
    #[getter]
    fn log(&self) -> Vec<BTreeMap<&'static str, f64>> {
        self.log.clone()
    }

    fn score(&self, s: String, r: String, o: String) -> PyResult<f64> {
        Ok(self.checkpoint.model.score(&self.resolve(&(s, r, o))?))
    }

    fn probability(&self, s: String, r: String, o: String) -> PyResult<f64> {
        Ok(self.checkpoint.model.probability(&self.resolve(&(s, r, o))?))
    }

    /// Triplets ordered from least to most plausible, with their scores.
    fn rank(&self, triplets: Vec<Named>) -> PyResult<Vec<(Named, f64)>> {
        let ids = self.resolve_all(&triplets)?;
        let scores: Vec<f64> = ids.iter().map(|t| self.checkpoint.model.score(t)).collect();
        let report = RankingReport::unlabeled(&ids, &scores).map_err(to_py)?;
        Ok(report
            .ranked()
            .into_iter()
            .map(|r| (self.vocab.describe(&r.triplet), r.score))
            .collect())
    }

    /// Metrics for a labeled set: `positives` are believed true,
    /// `negatives` are the known errors.
    fn evaluate(&self, positives: Vec<Named>, negatives: Vec<Named>) -> PyResult<BTreeMap<String, f64>> {
        let set =
            EvaluationSet::from_parts(&self.resolve_all(&positives)?, &self.resolve_all(&negatives)?).map_err(to_py)?;
        let (_, m) = evaluate(&self.checkpoint.model, &set).map_err(to_py)?;
        let mut out = BTreeMap::from([
            ("recall".to_owned(), m.recall),
            ("mean_rank_filter".to_owned(), m.mean_rank_filter),
            ("mean_rank_raw".to_owned(), m.mean_rank_raw),
        ]);
        for (k, v) in m.precision_at {
            out.insert(format!("precision_at_{k}"), v);
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({}, dim={}, {} entities)",
            self.checkpoint.model.kind(),
            self.checkpoint.model.dim(),
            self.checkpoint.entities.len()
        )
    }
}

/// Trains on in-memory graphs. Keyword options use the command-line flag
/// names, e.g. `train(g, ext, model="complex", dim=64, neg_cross=False)`.
#[pyfunction]
#[pyo3(signature = (target, external = None, aliases = None, **options))]
fn train(
    py: Python<'_>,
    target: &PyGraph,
    external: Option<&PyGraph>,
    aliases: Option<Vec<(String, String)>>,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyModel> {
    let cfg = run_config(options)?;
    let table = alias_table(aliases)?;
    let target = target.inner.clone();
    let external = external.map(|g| g.inner.clone());
    let (checkpoint, log) = py
        .detach(|| {
            let graphs = prepare_graphs(target, external, &table, &cfg)?;
            train_prepared(&graphs, &cfg)
        })
        .map_err(to_py)?;
    let log = log
        .iter()
        .map(|e| {
            BTreeMap::from([
                ("epoch", e.epoch as f64),
                ("mean_loss_g1", e.mean_loss_g1),
                ("mean_loss_g2", e.mean_loss_g2),
                ("gated_fraction", e.gated_fraction),
            ])
        })
        .collect();
    Ok(PyModel::new(checkpoint, log))
}

/// Ranking metrics from the 1-based ranks of the known errors among
/// `total` ranked items.
#[pyfunction]
#[pyo3(signature = (negative_ranks, total, cutoffs = None))]
fn metrics(negative_ranks: Vec<usize>, total: usize, cutoffs: Option<Vec<usize>>) -> PyResult<BTreeMap<String, f64>> {
    if negative_ranks.iter().any(|&r| r == 0 || r > total) {
        return Err(DataError::new_err(format!("ranks must lie in 1..={total}")));
    }
    let mut out = BTreeMap::from([
        ("recall".to_owned(), recall_of_ranking(&negative_ranks).map_err(to_py)?),
        (
            "mean_rank_filter".to_owned(),
            mean_filtered_rank(&negative_ranks).map_err(to_py)?,
        ),
        (
            "mean_rank_raw".to_owned(),
            mean_raw_rank(&negative_ranks).map_err(to_py)?,
        ),
    ]);
    for k in cutoffs.unwrap_or_default() {
        out.insert(
            format!("precision_at_{k}"),
            precision_at_k(&negative_ranks, total, k).map_err(to_py)?,
        );
    }
    Ok(out)
}

#[pymodule]
fn crossval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyAlignment>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    let py = m.py();
    m.add("CrossvalError", py.get_type::<CrossvalError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    Ok(())
}
