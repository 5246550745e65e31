//! End-to-end runs behind the command-line tool: configuration, checkpoints,
//! and the ingest-check, train, validate, corrupt and bench commands.
//!
//! Every output is a pure function of the configuration, so two runs with the
//! same config produce byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{align, remap, AliasTable, AlignmentMap};
use crate::error::{Error, Result};
use crate::eval::{default_cutoffs, inject_errors, rank, split_eval, EvaluationSet, Metrics, RankingReport};
use crate::graph::{GraphTag, KnowledgeGraph, Triplet, Vocab};
use crate::model::EmbeddingModel;
use crate::negatives::NegativeRelationIndex;
use crate::trainer::{stream, EpochLog, Trainer, TrainerConfig, TrainingData};

const CHECKPOINT_FORMAT: &str = "crossval-checkpoint/1";
const EXTERNAL_SAMPLE_STREAM: u64 = 3;
const CORRUPT_STREAM: u64 = 4;
const BENCH_STREAM: u64 = 5;

/// Everything a run needs. Paths are optional because each command uses a
/// different subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub target: Option<PathBuf>,
    pub external: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    /// Labeled `s r o label` file.
    pub eval: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Share of the aligned entities that stay aligned.
    pub overlap_fraction: f64,
    /// Seeded subsample size of the external graph.
    pub external_triplets: Option<usize>,
    /// Errors injected by `corrupt`; default 5% of the target.
    pub errors: Option<usize>,
    /// Share of the labeled triplets set aside for tuning by `corrupt`.
    pub tune_fraction: f64,
    /// Triplet counts timed by `bench`.
    pub sizes: Vec<usize>,
    pub trainer: TrainerConfig,
    #[serde(skip)]
    confidence_set: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            target: None,
            external: None,
            aliases: None,
            eval: None,
            checkpoint: None,
            out: None,
            overlap_fraction: 1.0,
            external_triplets: None,
            errors: None,
            tune_fraction: 0.2,
            sizes: vec![10_000, 20_000, 40_000, 80_000, 160_000],
            trainer: TrainerConfig::default(),
            confidence_set: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key} expects on/off, got {value:?}"))),
    }
}

impl RunConfig {
    /// Sets one option. Keys are the long flag names; `_` and `-` are
    /// interchangeable and the trainer field names are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let path = || Some(PathBuf::from(value.trim()));
        let t = &mut self.trainer;
        match key.as_str() {
            "target" => self.target = path(),
            "external" => self.external = path(),
            "aliases" => self.aliases = path(),
            "eval" => self.eval = path(),
            "checkpoint" => self.checkpoint = path(),
            "out" => self.out = path(),
            "overlap_fraction" => self.overlap_fraction = parse(&key, value)?,
            "external_triplets" => self.external_triplets = Some(parse(&key, value)?),
            "errors" => self.errors = Some(parse(&key, value)?),
            "tune_fraction" => self.tune_fraction = parse(&key, value)?,
            "sizes" => {
                self.sizes = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(&key, s))
                    .collect::<Result<_>>()?
            }
            "model" => t.model = parse(&key, value)?,
            "dim" => t.dim = parse(&key, value)?,
            "lr" | "learning_rate" => t.learning_rate = parse(&key, value)?,
            "batch" | "batch_size" => t.batch_size = parse(&key, value)?,
            "epochs" => t.epochs = parse(&key, value)?,
            "lambda" => t.lambda = parse(&key, value)?,
            "theta" => t.theta = parse(&key, value)?,
            "l2" | "l2_coeff" => t.l2_coeff = parse(&key, value)?,
            "neg_conventional" => t.neg_conventional = parse(&key, value)?,
            "neg_relation" => t.neg_relation = parse(&key, value)?,
            "neg_entity" => t.neg_entity = parse(&key, value)?,
            "neg_cross" | "cross_negatives" => t.cross_negatives = parse_switch(&key, value)?,
            "confidence" => {
                t.confidence = parse_switch(&key, value)?;
                self.confidence_set = true;
            }
            "confidence_warmup" => t.confidence_warmup = parse(&key, value)?,
            "margin" => t.margin = parse(&key, value)?,
            "seed" => t.seed = parse(&key, value)?,
            "threads" => t.threads = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown option {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file: TOML when it parses as TOML (tables are
    /// flattened), plain `key = value` lines otherwise.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        match text.parse::<toml::Table>() {
            Ok(table) => self.apply_table(&table),
            Err(_) => {
                for (n, line) in text.lines().enumerate() {
                    let line = line.split('#').next().unwrap_or("").trim();
                    if line.is_empty() || line.starts_with('[') {
                        continue;
                    }
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
                    let v = v.trim().trim_matches('"');
                    self.set(k, v)?;
                }
                Ok(())
            }
        }
    }

    fn apply_table(&mut self, table: &toml::Table) -> Result<()> {
        for (k, v) in table {
            let text = match v {
                toml::Value::Table(inner) => {
                    self.apply_table(inner)?;
                    continue;
                }
                toml::Value::String(s) => s.clone(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_owned))
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            self.set(k, &text)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Final trainer settings. Confidence weighting defaults to off for the
    /// translational baseline unless it was asked for explicitly.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut cfg = self.clone();
        if !cfg.confidence_set && !cfg.trainer.model.is_multiplicative() {
            cfg.trainer.confidence = false;
        }
        cfg.confidence_set = true;
        cfg.trainer.validate()?;
        if !(cfg.overlap_fraction > 0.0 && cfg.overlap_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "overlap fraction must be in (0, 1], got {}",
                cfg.overlap_fraction
            )));
        }
        if !(0.0..1.0).contains(&cfg.tune_fraction) {
            return Err(Error::Config(format!(
                "tune fraction must be in [0, 1), got {}",
                cfg.tune_fraction
            )));
        }
        for p in [&cfg.target, &cfg.external, &cfg.aliases, &cfg.eval]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("--{what} is required")))
    }
}

/// Graphs in the shared id space, ready for training.
pub struct PreparedGraphs {
    pub target: KnowledgeGraph,
    pub external: Option<KnowledgeGraph>,
    pub map: Option<AlignmentMap>,
}

impl PreparedGraphs {
    pub fn entity_names(&self) -> Vec<String> {
        match &self.map {
            Some(m) => m.shared_entities().names().to_vec(),
            None => self.target.entities().names().to_vec(),
        }
    }
}

/// Ingests, subsamples, aligns and remaps the graphs named by `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedGraphs> {
    let target_path = cfg.require(&cfg.target, "target")?;
    let target = KnowledgeGraph::ingest(target_path, GraphTag::Target).map_err(|e| e.in_stage("ingest target"))?;
    let external = match &cfg.external {
        Some(p) => Some(KnowledgeGraph::ingest(p, GraphTag::External).map_err(|e| e.in_stage("ingest external"))?),
        None => None,
    };
    let aliases = match &cfg.aliases {
        Some(p) => AliasTable::load(p).map_err(|e| e.in_stage("aliases"))?,
        None => AliasTable::new(),
    };
    prepare_graphs(target, external, &aliases, cfg)
}

/// Same as [`prepare`] for graphs already in memory.
pub fn prepare_graphs(
    target: KnowledgeGraph,
    external: Option<KnowledgeGraph>,
    aliases: &AliasTable,
    cfg: &RunConfig,
) -> Result<PreparedGraphs> {
    let Some(mut external) = external else {
        return Ok(PreparedGraphs {
            target,
            external: None,
            map: None,
        });
    };
    if let Some(n) = cfg.external_triplets {
        if n == 0 {
            return Err(Error::Config("--external-triplets must be positive".into()));
        }
        if n < external.len() {
            let mut rng = stream(cfg.trainer.seed, EXTERNAL_SAMPLE_STREAM);
            let mut keep = index::sample(&mut rng, external.len(), n).into_vec();
            keep.sort_unstable();
            let triplets = external.triplets();
            external = external.restricted_to(keep.into_iter().map(|i| triplets[i]))?;
        }
    }
    let mut map = align(&target, &external, aliases);
    if cfg.overlap_fraction < 1.0 {
        map = map.subsample(cfg.overlap_fraction, cfg.trainer.seed, external.entities())?;
    }
    let remapped = remap(&external, &map).map_err(|e| e.in_stage("align"))?;
    Ok(PreparedGraphs {
        target,
        external: Some(remapped),
        map: Some(map),
    })
}

/// Trained parameters plus the vocabularies and config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    /// Shared entity names, target entities first.
    pub entities: Vec<String>,
    pub target_relations: Vec<String>,
    pub external_relations: Vec<String>,
    pub config: RunConfig,
    pub model: EmbeddingModel,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: Checkpoint = serde_json::from_str(text)?;
        // stored configs are already resolved
        c.config.confidence_set = true;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::VocabMismatch(format!(
                "unsupported checkpoint format {:?}",
                c.format
            )));
        }
        if c.entities.len() != c.model.num_entities()
            || c.target_relations.len() + c.external_relations.len() != c.model.num_relations()
        {
            return Err(Error::VocabMismatch(
                "checkpoint vocabularies do not match the model size".into(),
            ));
        }
        if !c.model.is_finite() {
            return Err(Error::NonFinite { epoch: 0, batch: 0 });
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// An empty graph carrying the target-side vocabulary, for resolving
    /// names in evaluation files.
    pub fn target_vocab(&self) -> KnowledgeGraph {
        KnowledgeGraph::from_triplets(
            GraphTag::Target,
            Vocab::from_names(0, self.entities.iter().cloned()),
            Vocab::from_names(0, self.target_relations.iter().cloned()),
            [],
        )
        .expect("no triplets to check")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub s: String,
    pub r: String,
    pub o: String,
    pub score: f64,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<i8>,
}

/// Validation output: metrics (when labels are known) and the full ranking,
/// most suspicious first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metrics: Option<Metrics>,
    pub ranking: Vec<ReportRow>,
    pub config: RunConfig,
}

impl Report {
    pub fn build(
        ranking: &RankingReport,
        metrics: Option<Metrics>,
        vocab: &KnowledgeGraph,
        config: &RunConfig,
    ) -> Self {
        let rows = ranking
            .ranked()
            .into_iter()
            .map(|e| {
                let (s, r, o) = vocab.describe(&e.triplet);
                ReportRow {
                    s,
                    r,
                    o,
                    score: e.score,
                    rank: e.rank,
                    label: e.label,
                }
            })
            .collect();
        Report {
            metrics,
            ranking: rows,
            config: config.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Ranks a labeled set and computes every metric.
pub fn evaluate(model: &EmbeddingModel, set: &EvaluationSet) -> Result<(RankingReport, Metrics)> {
    let ranking = rank(model, set)?;
    let metrics = ranking.metrics(&default_cutoffs(set.len()))?;
    Ok((ranking, metrics))
}

pub struct TrainArtifacts {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    /// Present when an evaluation set was configured.
    pub report: Option<Report>,
}

impl TrainArtifacts {
    pub fn log_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for entry in &self.log {
            out += &serde_json::to_string(entry)?;
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes `checkpoint.json`, `train_log.jsonl` and, if present,
    /// `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        write_file(&dir.join("checkpoint.json"), &self.checkpoint.to_json()?)?;
        write_file(&dir.join("train_log.jsonl"), &self.log_jsonl()?)?;
        if let Some(r) = &self.report {
            write_file(&dir.join("report.json"), &r.to_json()?)?;
        }
        Ok(())
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Full training run. Nothing is written; see [`TrainArtifacts::write_to`].
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainArtifacts> {
    let cfg = cfg.resolved()?;
    let graphs = prepare(&cfg)?;
    let (checkpoint, log) = train_prepared(&graphs, &cfg)?;
    let report = match &cfg.eval {
        Some(path) => Some(validate_labeled(&checkpoint, path, &cfg)?),
        None => None,
    };
    Ok(TrainArtifacts {
        checkpoint,
        log,
        report,
    })
}

/// Trains on prepared graphs. `cfg` should already be resolved.
pub fn train_prepared(graphs: &PreparedGraphs, cfg: &RunConfig) -> Result<(Checkpoint, Vec<EpochLog>)> {
    let data = TrainingData {
        target: &graphs.target,
        external: graphs.external.as_ref(),
    };
    let tc = &cfg.trainer;
    let mut model = EmbeddingModel::init(tc.model, tc.dim, data.num_entities(), data.num_relations(), tc.seed)?;
    let log = Trainer::new(&data, tc)?
        .run(&mut model, |entry, _| {
            log::info!(
                "epoch {} loss {:.6} / {:.6}",
                entry.epoch,
                entry.mean_loss_g1,
                entry.mean_loss_g2
            )
        })
        .map_err(|e| e.in_stage("train"))?;
    let checkpoint = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        entities: graphs.entity_names(),
        target_relations: graphs.target.relations().names().to_vec(),
        external_relations: graphs
            .external
            .as_ref()
            .map(|g| g.relations().names().to_vec())
            .unwrap_or_default(),
        // The output location does not affect the result, so it is left out
        // to keep checkpoints comparable across directories.
        config: RunConfig {
            out: None,
            ..cfg.clone()
        },
        model,
    };
    Ok((checkpoint, log))
}

fn validate_labeled(checkpoint: &Checkpoint, eval: &Path, cfg: &RunConfig) -> Result<Report> {
    let vocab = checkpoint.target_vocab();
    let set = EvaluationSet::load_tsv(eval, &vocab).map_err(|e| e.in_stage("load evaluation set"))?;
    let (ranking, metrics) = evaluate(&checkpoint.model, &set)?;
    Ok(Report::build(&ranking, Some(metrics), &vocab, cfg))
}

/// Ranks the labeled set (`eval`) or, without one, every target triplet.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Report> {
    let cfg = cfg.resolved()?;
    let path = cfg.require(&cfg.checkpoint, "checkpoint")?;
    let checkpoint = Checkpoint::load(path).map_err(|e| e.in_stage("load checkpoint"))?;
    if let Some(eval) = &cfg.eval {
        return validate_labeled(&checkpoint, eval, &cfg);
    }
    let target_path = cfg.require(&cfg.target, "eval or --target")?;
    let target = KnowledgeGraph::ingest(target_path, GraphTag::Target).map_err(|e| e.in_stage("ingest target"))?;
    let vocab = checkpoint.target_vocab();
    let mut triplets = Vec::with_capacity(target.len());
    for t in target.triplets() {
        let (s, r, o) = target.describe(t);
        let id = vocab
            .lookup(&s, &r, &o)
            .ok_or_else(|| Error::VocabMismatch(format!("({s}, {r}, {o}) is not in the checkpoint vocabulary")))?;
        triplets.push(id);
    }
    let scores: Vec<f64> = triplets.iter().map(|t| checkpoint.model.score(t)).collect();
    let ranking = RankingReport::unlabeled(&triplets, &scores)?;
    Ok(Report::build(&ranking, None, &vocab, &cfg))
}

pub struct CorruptOutput {
    /// Target graph with the corruptions appended.
    pub noisy: KnowledgeGraph,
    pub tune: Option<EvaluationSet>,
    pub test: EvaluationSet,
}

impl CorruptOutput {
    /// Writes `target_noisy.tsv` plus `eval_tune.tsv`/`eval_test.tsv`, or
    /// `eval.tsv` when nothing was held out for tuning.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let p = dir.join(name);
            File::create(&p)
                .map(BufWriter::new)
                .map_err(|e| Error::io(format!("creating {}", p.display()), e))
        };
        let mut w = create("target_noisy.tsv")?;
        self.noisy.write_tsv(&mut w)?;
        w.flush().map_err(|e| Error::io("writing target_noisy.tsv", e))?;
        let sets: Vec<(&str, &EvaluationSet)> = match &self.tune {
            Some(tune) => vec![("eval_tune.tsv", tune), ("eval_test.tsv", &self.test)],
            None => vec![("eval.tsv", &self.test)],
        };
        for (name, set) in sets {
            let mut w = create(name)?;
            set.write_tsv(&mut w, &self.noisy)?;
            w.flush().map_err(|e| Error::io(format!("writing {name}"), e))?;
        }
        Ok(())
    }
}

/// Injects errors into the target graph and builds the labeled sets.
pub fn cmd_corrupt(cfg: &RunConfig) -> Result<CorruptOutput> {
    let cfg = cfg.resolved()?;
    let target_path = cfg.require(&cfg.target, "target")?;
    let clean = KnowledgeGraph::ingest(target_path, GraphTag::Target).map_err(|e| e.in_stage("ingest target"))?;
    let n = cfg
        .errors
        .unwrap_or_else(|| (clean.len() as f64 * 0.05).round() as usize);
    let mut rng = stream(cfg.trainer.seed, CORRUPT_STREAM);
    let (sources, errors) = inject_errors(&clean, n, &mut rng).map_err(|e| e.in_stage("corrupt"))?;
    let noisy = clean.with_triplets(errors.iter().copied())?;
    let labeled = EvaluationSet::from_parts(&sources, &errors)?;
    let (tune, test) = if cfg.tune_fraction > 0.0 {
        let (tune, test) = split_eval(&labeled, cfg.tune_fraction, &mut rng)?;
        (Some(tune), test)
    } else {
        (None, labeled)
    };
    Ok(CorruptOutput { noisy, tune, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub triplets: usize,
    pub median_seconds: f64,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// `n` uniformly random triplets over the model's id ranges.
pub fn random_triplets(model: &EmbeddingModel, n: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = stream(seed, BENCH_STREAM);
    let ne = model.num_entities() as u32;
    let nr = model.num_relations() as u32;
    (0..n)
        .map(|_| {
            Triplet::new(
                rng.random_range(0..ne),
                rng.random_range(0..nr),
                rng.random_range(0..ne),
            )
        })
        .collect()
}

/// Scores and ranks `triplets` once; returns the elapsed seconds.
pub fn time_validation(model: &EmbeddingModel, triplets: &[Triplet]) -> Result<f64> {
    let start = Instant::now();
    let scores: Vec<f64> = triplets.iter().map(|t| model.score(t)).collect();
    let ranking = RankingReport::unlabeled(triplets, &scores)?;
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(ranking);
    Ok(elapsed)
}

/// Median of `reps` timings per size, single-threaded.
pub fn bench_scoring(model: &EmbeddingModel, sizes: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("bench sizes must be ascending".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let triplets = random_triplets(model, n, seed);
        let mut times = (0..reps.max(1))
            .map(|_| time_validation(model, &triplets))
            .collect::<Result<Vec<_>>>()?;
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            triplets: n,
            median_seconds: times[times.len() / 2],
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("triplets,median_seconds\n");
    for r in rows {
        out += &format!("{},{:.9}\n", r.triplets, r.median_seconds);
    }
    out
}

/// Times validation of the configured checkpoint, or of a freshly
/// initialized model of the configured kind and size when none is given.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    let cfg = cfg.resolved()?;
    let model = match &cfg.checkpoint {
        Some(p) => Checkpoint::load(p).map_err(|e| e.in_stage("load checkpoint"))?.model,
        None => {
            let t = &cfg.trainer;
            EmbeddingModel::init(t.model, t.dim, 10_000, 100, t.seed)?
        }
    };
    bench_scoring(&model, &cfg.sizes, 5, cfg.trainer.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub triplets: usize,
    pub entities: usize,
    pub relations: usize,
    pub duplicates_dropped: usize,
}

impl GraphSummary {
    fn of(g: &KnowledgeGraph) -> Self {
        GraphSummary {
            triplets: g.len(),
            entities: g.entities().len(),
            relations: g.relations().len(),
            duplicates_dropped: g.duplicates_dropped(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub target: GraphSummary,
    pub external: Option<GraphSummary>,
    pub overlapping_entities: Option<usize>,
    pub shared_entities: usize,
    /// Cross-graph relation pairs with no common entity pair.
    pub negative_relation_pairs: Option<usize>,
}

/// Loads and aligns the configured graphs and reports their sizes.
pub fn cmd_ingest_check(cfg: &RunConfig) -> Result<IngestSummary> {
    let cfg = cfg.resolved()?;
    let graphs = prepare(&cfg)?;
    let index = graphs
        .external
        .as_ref()
        .map(|ext| NegativeRelationIndex::build(&graphs.target, ext));
    Ok(IngestSummary {
        target: GraphSummary::of(&graphs.target),
        external: graphs.external.as_ref().map(GraphSummary::of),
        overlapping_entities: graphs.map.as_ref().map(AlignmentMap::overlapping),
        shared_entities: graphs.entity_names().len(),
        negative_relation_pairs: index.map(|i| i.pair_count()),
    })
}
