//! Ranking of labeled target triplets and the validation metrics.
//!
//! Triplets are sorted by ascending score, so the most suspicious ones come
//! first. Ties keep input order.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{open_text, parse_row, KnowledgeGraph, Triplet};
use crate::model::EmbeddingModel;
use crate::negatives::{corrupt_once, Observed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledTriplet {
    pub triplet: Triplet,
    /// `+1` for true facts, `-1` for errors.
    pub label: i8,
}

impl LabeledTriplet {
    pub fn is_negative(&self) -> bool {
        self.label < 0
    }
}

/// `D = D+ ∪ D-`, in a fixed order that also serves as the tie-break.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationSet {
    items: Vec<LabeledTriplet>,
}

impl EvaluationSet {
    pub fn new(items: Vec<LabeledTriplet>) -> Result<Self> {
        let mut seen: BTreeMap<Triplet, i8> = BTreeMap::new();
        for it in &items {
            if it.label != 1 && it.label != -1 {
                return Err(Error::InvalidArgument(format!(
                    "label must be +1 or -1, got {}",
                    it.label
                )));
            }
            if let Some(&prev) = seen.get(&it.triplet) {
                if prev != it.label {
                    return Err(Error::InvalidArgument(format!(
                        "{} is labeled both positive and negative",
                        it.triplet
                    )));
                }
            }
            seen.insert(it.triplet, it.label);
        }
        Ok(EvaluationSet { items })
    }

    pub fn from_parts(positives: &[Triplet], negatives: &[Triplet]) -> Result<Self> {
        let items = positives
            .iter()
            .map(|&triplet| LabeledTriplet { triplet, label: 1 })
            .chain(negatives.iter().map(|&triplet| LabeledTriplet { triplet, label: -1 }))
            .collect();
        Self::new(items)
    }

    pub fn items(&self) -> &[LabeledTriplet] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_negatives(&self) -> usize {
        self.items.iter().filter(|i| i.is_negative()).count()
    }

    /// Reads `s\tr\to\tlabel` rows, resolving names through `vocab`.
    pub fn load_tsv(path: impl AsRef<Path>, vocab: &KnowledgeGraph) -> Result<Self> {
        let path = path.as_ref();
        let reader = open_text(path)?;
        let mut items = Vec::new();
        for (n, line) in std::io::BufRead::lines(reader).enumerate() {
            let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let Some([s, r, o, label]) = parse_row::<4>(&line, path, n + 1)? else {
                continue;
            };
            let label = match label {
                "1" | "+1" => 1,
                "-1" => -1,
                other => {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: n + 1,
                        message: format!("label must be +1 or -1, got {other:?}"),
                    })
                }
            };
            let triplet = vocab.lookup(s, r, o).ok_or_else(|| {
                Error::VocabMismatch(format!(
                    "{}:{}: ({s}, {r}, {o}) is not in the model vocabulary",
                    path.display(),
                    n + 1
                ))
            })?;
            items.push(LabeledTriplet { triplet, label });
        }
        Self::new(items)
    }

    pub fn write_tsv(&self, mut w: impl Write, vocab: &KnowledgeGraph) -> Result<()> {
        for it in &self.items {
            let (s, r, o) = vocab.describe(&it.triplet);
            let label = if it.label > 0 { "+1" } else { "-1" };
            writeln!(w, "{s}\t{r}\t{o}\t{label}").map_err(|e| Error::io("writing evaluation set", e))?;
        }
        Ok(())
    }
}

/// 1-based ranks of `scores` sorted ascending, ties broken by index.
pub fn rank_scores(scores: &[f64]) -> Vec<usize> {
    // (score, index) keys are unique, so an unstable sort is deterministic
    let mut order: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ranks = vec![0; scores.len()];
    for (pos, (_, i)) in order.into_iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

fn require_negatives(neg_ranks: &[usize]) -> Result<()> {
    if neg_ranks.is_empty() {
        Err(Error::InvalidArgument("the evaluation set has no negatives".into()))
    } else {
        Ok(())
    }
}

/// Sum of the negatives' ranks (numerator of the mean raw rank).
pub fn raw_rank_sum(neg_ranks: &[usize]) -> usize {
    neg_ranks.iter().sum()
}

/// Sum of `rank_i - i` over the negatives sorted by rank, `i` 1-based
/// (numerator of the mean filtered rank).
pub fn filtered_rank_sum(neg_ranks: &[usize]) -> usize {
    let mut sorted = neg_ranks.to_vec();
    sorted.sort_unstable();
    sorted.iter().enumerate().map(|(i, r)| r - (i + 1)).sum()
}

/// Mean rank of the negatives.
pub fn mean_raw_rank(neg_ranks: &[usize]) -> Result<f64> {
    require_negatives(neg_ranks)?;
    Ok(raw_rank_sum(neg_ranks) as f64 / neg_ranks.len() as f64)
}

/// Mean of `rank_i - i` over the negatives sorted by rank.
pub fn mean_filtered_rank(neg_ranks: &[usize]) -> Result<f64> {
    require_negatives(neg_ranks)?;
    Ok(filtered_rank_sum(neg_ranks) as f64 / neg_ranks.len() as f64)
}

/// Fraction of negatives ranked within the top `|D-|`.
pub fn recall_of_ranking(neg_ranks: &[usize]) -> Result<f64> {
    require_negatives(neg_ranks)?;
    let n = neg_ranks.len();
    Ok(neg_ranks.iter().filter(|&&r| r <= n).count() as f64 / n as f64)
}

/// Negatives among the top `k` of `total` ranked triplets, divided by `k`.
pub fn precision_at(neg_ranks: &[usize], total: usize, k: usize) -> Result<f64> {
    if k == 0 || k > total {
        return Err(Error::InvalidArgument(format!("K must be in 1..={total}, got {k}")));
    }
    Ok(neg_ranks.iter().filter(|&&r| r <= k).count() as f64 / k as f64)
}

/// Cut-offs scaled from K = 100, 200, 500 on a 2,000-triplet test set.
pub fn default_cutoffs(total: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = [0.05, 0.1, 0.25]
        .iter()
        .map(|f| ((total as f64 * f).round() as usize).clamp(1, total.max(1)))
        .collect();
    ks.dedup();
    ks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: f64,
    pub mean_rank_filter: f64,
    pub mean_rank_raw: f64,
    pub precision_at: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTriplet {
    pub triplet: Triplet,
    pub score: f64,
    pub rank: usize,
    pub label: Option<i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    /// In evaluation-set order.
    pub entries: Vec<RankedTriplet>,
}

impl RankingReport {
    /// Ranks labeled triplets given their scores (same order as `set`).
    pub fn from_scores(set: &EvaluationSet, scores: &[f64]) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::InvalidArgument("cannot rank an empty evaluation set".into()));
        }
        assert_eq!(set.len(), scores.len(), "one score per triplet");
        let ranks = rank_scores(scores);
        let entries = set
            .items()
            .iter()
            .zip(scores)
            .zip(ranks)
            .map(|((it, &score), rank)| RankedTriplet {
                triplet: it.triplet,
                score,
                rank,
                label: Some(it.label),
            })
            .collect();
        Ok(RankingReport { entries })
    }

    /// Ranks triplets without labels; no metric can be computed from it.
    pub fn unlabeled(triplets: &[Triplet], scores: &[f64]) -> Result<Self> {
        if triplets.is_empty() {
            return Err(Error::InvalidArgument("cannot rank an empty triplet list".into()));
        }
        assert_eq!(triplets.len(), scores.len(), "one score per triplet");
        let entries = triplets
            .iter()
            .zip(scores)
            .zip(rank_scores(scores))
            .map(|((&triplet, &score), rank)| RankedTriplet {
                triplet,
                score,
                rank,
                label: None,
            })
            .collect();
        Ok(RankingReport { entries })
    }

    pub fn negative_ranks(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.label.is_some_and(|l| l < 0))
            .map(|e| e.rank)
            .collect()
    }

    /// Entries sorted by rank.
    pub fn ranked(&self) -> Vec<&RankedTriplet> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by_key(|e| e.rank);
        v
    }

    pub fn mean_raw_rank(&self) -> Result<f64> {
        mean_raw_rank(&self.negative_ranks())
    }

    pub fn mean_filtered_rank(&self) -> Result<f64> {
        mean_filtered_rank(&self.negative_ranks())
    }

    pub fn recall(&self) -> Result<f64> {
        recall_of_ranking(&self.negative_ranks())
    }

    pub fn precision_at(&self, k: usize) -> Result<f64> {
        precision_at(&self.negative_ranks(), self.entries.len(), k)
    }

    pub fn metrics(&self, cutoffs: &[usize]) -> Result<Metrics> {
        let neg = self.negative_ranks();
        let mut precision = BTreeMap::new();
        for &k in cutoffs {
            precision.insert(k.to_string(), precision_at(&neg, self.entries.len(), k)?);
        }
        Ok(Metrics {
            recall: recall_of_ranking(&neg)?,
            mean_rank_filter: mean_filtered_rank(&neg)?,
            mean_rank_raw: mean_raw_rank(&neg)?,
            precision_at: precision,
        })
    }
}

/// Scores every triplet of `set` with `model` and ranks them.
pub fn rank(model: &EmbeddingModel, set: &EvaluationSet) -> Result<RankingReport> {
    for it in set.items() {
        model.check_triplet(&it.triplet)?;
    }
    let scores: Vec<f64> = set.items().iter().map(|it| model.score(&it.triplet)).collect();
    RankingReport::from_scores(set, &scores)
}

/// Samples `n` observed triplets and corrupts each one's subject or object
/// into a distinct triplet absent from `g`. Returns `(sources, corruptions)`.
pub fn inject_errors<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Triplet>, Vec<Triplet>)> {
    if n > g.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot corrupt {n} triplets of a graph with {}",
            g.len()
        )));
    }
    let mut picked: Vec<usize> = index::sample(rng, g.len(), n).into_vec();
    picked.sort_unstable();
    let sources: Vec<Triplet> = picked.iter().map(|&i| g.triplets()[i]).collect();
    let graphs = [g];
    let observed = Observed::new(&graphs);
    let num_entities = g.entities().end();
    let mut made = HashSet::new();
    let mut corrupted = Vec::with_capacity(n);
    for t in &sources {
        let mut done = false;
        for _ in 0..crate::negatives::MAX_RETRIES {
            let c = corrupt_once(t, num_entities, observed, rng)?;
            if made.insert(c) {
                corrupted.push(c);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Sampling(format!("could not find a fresh corruption of {t}")));
        }
    }
    Ok((sources, corrupted))
}

/// Stratified split: `round(fraction * |D+|)` positives and
/// `round(fraction * |D-|)` negatives go to the tuning set.
pub fn split_eval<R: Rng + ?Sized>(
    set: &EvaluationSet,
    fraction: f64,
    rng: &mut R,
) -> Result<(EvaluationSet, EvaluationSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut tune_mask = vec![false; set.len()];
    for label in [1i8, -1] {
        let mut idx: Vec<usize> = (0..set.len()).filter(|&i| set.items[i].label == label).collect();
        let take = (fraction * idx.len() as f64).round() as usize;
        idx.shuffle(rng);
        for &i in &idx[..take] {
            tune_mask[i] = true;
        }
    }
    let (tune, test): (Vec<_>, Vec<_>) = set.items.iter().zip(&tune_mask).partition(|(_, &m)| m);
    let unzip = |v: Vec<(&LabeledTriplet, &bool)>| v.into_iter().map(|(it, _)| *it).collect::<Vec<_>>();
    let (tune, test) = (unzip(tune), unzip(test));
    if tune.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split of {} items at fraction {fraction} leaves an empty side",
            set.len()
        )));
    }
    Ok((EvaluationSet { items: tune }, EvaluationSet { items: test }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphTag;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ORACLE_RANKS: [usize; 4] = [1, 2, 4, 7];

    #[test]
    fn worked_example_metrics() {
        assert_eq!(mean_filtered_rank(&ORACLE_RANKS).unwrap(), 1.0);
        assert_eq!(mean_raw_rank(&ORACLE_RANKS).unwrap(), 3.5);
        assert_eq!(recall_of_ranking(&ORACLE_RANKS).unwrap(), 0.75);
        assert_eq!(precision_at(&ORACLE_RANKS, 7, 2).unwrap(), 1.0);
        assert_eq!(precision_at(&ORACLE_RANKS, 7, 5).unwrap(), 0.6);
    }

    #[test]
    fn degenerate_metric_inputs() {
        assert_eq!(mean_raw_rank(&[1]).unwrap(), 1.0);
        assert_eq!(mean_filtered_rank(&[3, 1, 2]).unwrap(), 0.0);
        assert_eq!(recall_of_ranking(&[2, 1]).unwrap(), 1.0);
        assert!(mean_raw_rank(&[]).is_err());
        assert!(mean_filtered_rank(&[]).is_err());
        assert!(recall_of_ranking(&[]).is_err());
        assert!(precision_at(&[1], 4, 0).is_err());
        assert!(precision_at(&[1], 4, 5).is_err());
        assert_eq!(precision_at(&[1], 4, 1).unwrap(), 1.0);
    }

    #[test]
    fn ranks_follow_scores_then_input_order() {
        assert_eq!(rank_scores(&[1.0, -1.0]), vec![2, 1]);
        assert_eq!(rank_scores(&[0.5, 0.5, 0.5]), vec![1, 2, 3]);
    }

    #[test]
    fn default_cutoffs_scale_with_size() {
        assert_eq!(default_cutoffs(2000), vec![100, 200, 500]);
        assert_eq!(default_cutoffs(4), vec![1]);
    }

    #[test]
    fn inject_errors_postconditions() {
        let rows: Vec<(String, String, String)> = (0..200)
            .map(|i| {
                (
                    format!("e{}", i % 37),
                    format!("r{}", i % 3),
                    format!("e{}", (i * 7) % 41),
                )
            })
            .collect();
        let g = KnowledgeGraph::from_named(GraphTag::Target, rows);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pos, neg) = inject_errors(&g, 50, &mut rng).unwrap();
        assert_eq!(pos.len(), 50);
        assert_eq!(neg.len(), 50);
        assert_eq!(neg.iter().collect::<HashSet<_>>().len(), 50);
        for (p, n) in pos.iter().zip(&neg) {
            assert!(g.contains(p));
            assert!(!g.contains(n));
            assert_eq!(p.relation, n.relation);
            assert!((p.subject == n.subject) ^ (p.object == n.object));
        }
        let (p0, n0) = inject_errors(&g, 0, &mut rng).unwrap();
        assert!(p0.is_empty() && n0.is_empty());
        assert!(inject_errors(&g, g.len() + 1, &mut rng).is_err());
    }

    fn labeled(n_pos: usize, n_neg: usize) -> EvaluationSet {
        let pos: Vec<_> = (0..n_pos as u32).map(|i| Triplet::new(i, 0, i + 1)).collect();
        let neg: Vec<_> = (0..n_neg as u32).map(|i| Triplet::new(i, 1, i + 1)).collect();
        EvaluationSet::from_parts(&pos, &neg).unwrap()
    }

    #[test]
    fn split_sizes() {
        let set = labeled(1250, 1250);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (tune, test) = split_eval(&set, 0.2, &mut rng).unwrap();
        assert_eq!(tune.len(), 500);
        assert_eq!(test.len(), 2000);
        assert_eq!(tune.num_negatives(), 250);
        let mut all: Vec<_> = tune.items().iter().chain(test.items()).copied().collect();
        all.sort_by_key(|i| i.triplet);
        let mut orig = set.items().to_vec();
        orig.sort_by_key(|i| i.triplet);
        assert_eq!(all, orig);
        assert!(split_eval(&labeled(1, 1), 0.01, &mut rng).is_err());
    }

    #[test]
    fn conflicting_labels_rejected() {
        let t = Triplet::new(0, 0, 1);
        assert!(EvaluationSet::from_parts(&[t], &[t]).is_err());
    }

    fn random_report(scores: &[f64], labels: &[bool]) -> RankingReport {
        let items = (0..scores.len())
            .map(|i| LabeledTriplet {
                triplet: Triplet::new(i as u32, 0, 0),
                label: if labels[i] { -1 } else { 1 },
            })
            .collect();
        RankingReport::from_scores(&EvaluationSet::new(items).unwrap(), scores).unwrap()
    }

    proptest! {
        #[test]
        fn ranks_match_argsort(scores in prop::collection::vec(-5i32..5, 1..60)) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let ranks = rank_scores(&scores);
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
            for (pos, &i) in order.iter().enumerate() {
                prop_assert_eq!(ranks[i], pos + 1);
            }
        }

        #[test]
        fn metric_identities(
            data in prop::collection::vec((-100i32..100, any::<bool>()), 1..80)
        ) {
            prop_assume!(data.iter().any(|d| d.1));
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            let report = random_report(&scores, &labels);
            let neg = report.negative_ranks();
            let n = neg.len();
            prop_assert_eq!(report.recall().unwrap(), report.precision_at(n).unwrap());
            let raw = report.mean_raw_rank().unwrap();
            let filt = report.mean_filtered_rank().unwrap();
            // exact on the integer numerators; the means differ only by rounding
            prop_assert_eq!(raw_rank_sum(&neg) - filtered_rank_sum(&neg), n * (n + 1) / 2);
            prop_assert!((raw - filt - (n as f64 + 1.0) / 2.0).abs() <= 1e-12 * raw);
            prop_assert!(filt >= 0.0);
            // brute-force definitions
            let direct_raw = neg.iter().sum::<usize>() as f64 / n as f64;
            prop_assert_eq!(raw, direct_raw);
            for k in 1..=scores.len() {
                let count = report.entries.iter().filter(|e| e.rank <= k && e.label == Some(-1)).count();
                prop_assert_eq!(report.precision_at(k).unwrap(), count as f64 / k as f64);
            }
            // rank-based: a strictly monotone transform changes nothing
            let warped: Vec<f64> = scores.iter().map(|s| (s / 10.0).exp() * 3.0 - 1.0).collect();
            prop_assert_eq!(random_report(&warped, &labels).negative_ranks(), neg);
        }
    }
}
