use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crossval::graph::{GraphTag, KnowledgeGraph};
use crossval::pipeline::{cmd_corrupt, cmd_ingest_check, cmd_train, cmd_validate, Checkpoint, RunConfig};
use crossval::synth::{generate, SyntheticConfig};
use crossval::ErrorClass;

struct Files {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Files {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn write_graph(g: &KnowledgeGraph, path: &Path) {
    let mut buf = Vec::new();
    g.write_tsv(&mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

/// Clean target, external graph and their synthetic ground truth on disk.
fn files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_owned();
    let pair = generate(&SyntheticConfig {
        target_entities: 100,
        external_entities: 150,
        overlap: 60,
        target_triplets: 600,
        external_triplets: 900,
        fact_density: 0.6,
        seed: 11,
        ..SyntheticConfig::default()
    })
    .unwrap();
    write_graph(&pair.clean_target, &root.join("target.tsv"));
    write_graph(&pair.external, &root.join("external.tsv"));
    Files { _dir: dir, root }
}

fn config(f: &Files, extra: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.set("target", f.path("target.tsv").to_str().unwrap()).unwrap();
    cfg.set("external", f.path("external.tsv").to_str().unwrap()).unwrap();
    for (k, v) in [("dim", "8"), ("epochs", "3"), ("batch", "64")].iter().chain(extra) {
        cfg.set(k, v).unwrap();
    }
    cfg
}

#[test]
fn gzip_and_plain_files_ingest_alike() {
    let f = files();
    let plain = fs::read(f.path("target.tsv")).unwrap();
    let gz_path = f.path("target.tsv.gz");
    let mut enc = flate2::write::GzEncoder::new(fs::File::create(&gz_path).unwrap(), flate2::Compression::default());
    enc.write_all(&plain).unwrap();
    enc.finish().unwrap();
    let a = KnowledgeGraph::ingest(f.path("target.tsv"), GraphTag::Target).unwrap();
    let b = KnowledgeGraph::ingest(&gz_path, GraphTag::Target).unwrap();
    assert_eq!(a.triplets(), b.triplets());
    assert_eq!(a.entities(), b.entities());
}

#[test]
fn config_file_formats_and_precedence() {
    let f = files();
    let toml_path = f.path("run.toml");
    fs::write(
        &toml_path,
        "model = \"complex\"\nsizes = [100, 200]\n[trainer]\nlearning_rate = 0.0005\nneg_cross = \"off\"\n",
    )
    .unwrap();
    let mut cfg = RunConfig::load(&toml_path).unwrap();
    assert_eq!(cfg.trainer.model.to_string(), "complex");
    assert_eq!(cfg.sizes, [100, 200]);
    assert!(!cfg.trainer.cross_negatives);
    cfg.set("lr", "0.01").unwrap();
    assert_eq!(cfg.trainer.learning_rate, 0.01);

    let kv_path = f.path("run.conf");
    fs::write(
        &kv_path,
        "# sweep point\nlambda = 0.1\nneg-conventional=3\n\nbatch_size = 512\n",
    )
    .unwrap();
    let cfg = RunConfig::load(&kv_path).unwrap();
    assert_eq!(cfg.trainer.lambda, 0.1);
    assert_eq!(cfg.trainer.neg_conventional, 3);
    assert_eq!(cfg.trainer.batch_size, 512);

    fs::write(&kv_path, "lambda 0.1\n").unwrap();
    assert_eq!(RunConfig::load(&kv_path).unwrap_err().class(), ErrorClass::Config);
    assert_eq!(
        RunConfig::load(f.path("absent.toml")).unwrap_err().class(),
        ErrorClass::Config
    );
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("theta", "1.5"),
        ("model", "rescal"),
        ("neg_cross", "maybe"),
        ("frobnicate", "1"),
    ] {
        let mut c = cfg.clone();
        let err = c.set(k, v).and_then(|_| c.resolved().map(|_| ()));
        assert_eq!(err.unwrap_err().class(), ErrorClass::Config, "{k}={v}");
    }
    cfg.set("model", "transe").unwrap();
    assert!(!cfg.resolved().unwrap().trainer.confidence);
    cfg.set("confidence", "on").unwrap();
    assert_eq!(cfg.resolved().unwrap_err().class(), ErrorClass::Config);
}

#[test]
fn corrupt_writes_disjoint_labeled_sets() {
    let f = files();
    let cfg = config(&f, &[("errors", "30"), ("seed", "5")]);
    let out = cmd_corrupt(&cfg).unwrap();
    let clean = KnowledgeGraph::ingest(f.path("target.tsv"), GraphTag::Target).unwrap();
    assert_eq!(out.noisy.len(), clean.len() + 30);
    let tune = out.tune.as_ref().unwrap();
    assert_eq!(tune.num_negatives() + out.test.num_negatives(), 30);
    assert_eq!(tune.len() + out.test.len(), 60);
    for item in tune.items().iter().chain(out.test.items()) {
        assert!(out.noisy.contains(&item.triplet));
        let (s, r, o) = out.noisy.describe(&item.triplet);
        let in_clean = clean.lookup(&s, &r, &o).is_some_and(|t| clean.contains(&t));
        assert_eq!(in_clean, !item.is_negative());
    }
    let again = cmd_corrupt(&cfg).unwrap();
    assert_eq!(again.noisy.triplets(), out.noisy.triplets());

    let dir = f.path("corrupted");
    out.write_to(&dir).unwrap();
    let reread = KnowledgeGraph::ingest(dir.join("target_noisy.tsv"), GraphTag::Target).unwrap();
    assert_eq!(reread.len(), out.noisy.len());
}

#[test]
fn train_then_validate_from_checkpoint() {
    let f = files();
    let cfg = config(&f, &[("errors", "20"), ("tune_fraction", "0")]);
    let data = f.path("data");
    cmd_corrupt(&cfg).unwrap().write_to(&data).unwrap();

    let mut cfg = config(&f, &[]);
    cfg.set("target", data.join("target_noisy.tsv").to_str().unwrap())
        .unwrap();
    cfg.set("eval", data.join("eval.tsv").to_str().unwrap()).unwrap();
    let artifacts = cmd_train(&cfg).unwrap();
    assert_eq!(artifacts.log.len(), 3);
    let run = f.path("run");
    artifacts.write_to(&run).unwrap();

    let loaded = Checkpoint::load(run.join("checkpoint.json")).unwrap();
    assert_eq!(loaded, artifacts.checkpoint);

    let mut vcfg = RunConfig::default();
    vcfg.set("checkpoint", run.join("checkpoint.json").to_str().unwrap())
        .unwrap();
    vcfg.set("eval", data.join("eval.tsv").to_str().unwrap()).unwrap();
    let report = cmd_validate(&vcfg).unwrap();
    assert_eq!(report.metrics, artifacts.report.as_ref().unwrap().metrics);
    assert_eq!(report.ranking.len(), 40);
    let ranks: Vec<usize> = report.ranking.iter().map(|r| r.rank).collect();
    assert_eq!(ranks, (1..=40).collect::<Vec<_>>());
    assert!(report.ranking.windows(2).all(|w| w[0].score <= w[1].score));

    // Without a labeled set every target triplet is ranked.
    let mut ucfg = RunConfig::default();
    ucfg.set("checkpoint", run.join("checkpoint.json").to_str().unwrap())
        .unwrap();
    ucfg.set("target", data.join("target_noisy.tsv").to_str().unwrap())
        .unwrap();
    let report = cmd_validate(&ucfg).unwrap();
    assert!(report.metrics.is_none());
    let noisy = KnowledgeGraph::ingest(data.join("target_noisy.tsv"), GraphTag::Target).unwrap();
    assert_eq!(report.ranking.len(), noisy.len());
    assert!(report.ranking.iter().all(|r| r.label.is_none()));
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let f = files();
    let artifacts = cmd_train(&config(&f, &[("epochs", "1")])).unwrap();
    let text = artifacts.checkpoint.to_json().unwrap();
    assert_eq!(Checkpoint::from_json(&text).unwrap(), artifacts.checkpoint);
    let wrong_format = text.replacen("crossval-checkpoint/1", "crossval-checkpoint/0", 1);
    assert!(Checkpoint::from_json(&wrong_format).is_err());
    let mut short = artifacts.checkpoint.clone();
    short.entities.pop();
    assert!(Checkpoint::from_json(&short.to_json().unwrap()).is_err());
    assert!(Checkpoint::from_json("{").is_err());
}

#[test]
fn validating_unknown_names_is_a_data_error() {
    let f = files();
    let run = f.path("run");
    cmd_train(&config(&f, &[("epochs", "1")]))
        .unwrap()
        .write_to(&run)
        .unwrap();
    let eval = f.path("eval.tsv");
    fs::write(&eval, "nobody\tknows\tnothing\t-1\n").unwrap();
    let mut cfg = RunConfig::default();
    cfg.set("checkpoint", run.join("checkpoint.json").to_str().unwrap())
        .unwrap();
    cfg.set("eval", eval.to_str().unwrap()).unwrap();
    assert_eq!(cmd_validate(&cfg).unwrap_err().class(), ErrorClass::Data);
}

#[test]
fn ingest_check_reports_overlap_and_subsampling() {
    let f = files();
    let full = cmd_ingest_check(&config(&f, &[])).unwrap();
    assert_eq!(full.overlapping_entities, Some(60));
    assert_eq!(full.external.unwrap().triplets, 900);
    let half = cmd_ingest_check(&config(
        &f,
        &[("overlap_fraction", "0.5"), ("external_triplets", "300")],
    ))
    .unwrap();
    assert_eq!(half.external.unwrap().triplets, 300);
    let overlap = half.overlapping_entities.unwrap();
    assert!(overlap > 0 && overlap <= 30, "{overlap}");
}

#[test]
fn aliases_extend_exact_matching() {
    let f = files();
    let text = fs::read_to_string(f.path("external.tsv")).unwrap();
    // Rename one shared entity on the external side only.
    let target = KnowledgeGraph::ingest(f.path("target.tsv"), GraphTag::Target).unwrap();
    let external = KnowledgeGraph::ingest(f.path("external.tsv"), GraphTag::External).unwrap();
    let shared = target
        .entities()
        .names()
        .iter()
        .find(|n| external.entity_id(n).is_some())
        .unwrap()
        .clone();
    let renamed: String = text
        .lines()
        .map(|l| {
            l.split('\t')
                .map(|x| if x == shared { "alias_of_shared" } else { x })
                .collect::<Vec<_>>()
                .join("\t")
                + "\n"
        })
        .collect();
    fs::write(f.path("external.tsv"), renamed).unwrap();
    let before = cmd_ingest_check(&config(&f, &[])).unwrap();
    assert_eq!(before.overlapping_entities, Some(59));
    fs::write(f.path("aliases.tsv"), format!("{shared}\talias_of_shared\n")).unwrap();
    let with = cmd_ingest_check(&config(&f, &[("aliases", f.path("aliases.tsv").to_str().unwrap())])).unwrap();
    assert_eq!(with.overlapping_entities, Some(60));
}
