//! Embedding tables, score functions and their analytic gradients.
//!
//! | kind     | entity row      | relation row     | score                                        |
//! |----------|-----------------|------------------|----------------------------------------------|
//! | DistMult | `e`             | `r`              | `<e_s, r, e_o>`                              |
//! | ComplEx  | `[re, im]`      | `[re, im]`       | `Re(<e_s, r, conj(e_o)>)`                    |
//! | SimplE   | `[head, tail]`  | `[r, r_inv]`     | `(<h_s, r, t_o> + <h_o, r_inv, t_s>) / 2`    |
//! | TransE   | `e`             | `r`              | `-‖e_s + r - e_o‖₂`                          |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Triplet;

/// Pre-sigmoid clamp keeping probabilities strictly inside (0, 1).
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    DistMult,
    ComplEx,
    SimplE,
    /// Translational baseline; trained with a margin loss and never
    /// combined with confidence weighting.
    TransE,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::SimplE,
        ModelKind::TransE,
    ];

    pub fn is_multiplicative(self) -> bool {
        !matches!(self, ModelKind::TransE)
    }

    fn entity_width(self, dim: usize) -> usize {
        match self {
            ModelKind::DistMult | ModelKind::TransE => dim,
            ModelKind::ComplEx | ModelKind::SimplE => 2 * dim,
        }
    }

    fn relation_width(self, dim: usize) -> usize {
        self.entity_width(dim)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::SimplE => "simple",
            ModelKind::TransE => "transe",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            "simple" => Ok(ModelKind::SimplE),
            "transe" => Ok(ModelKind::TransE),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Table {
    Entity,
    Relation,
}

/// One parameter row: an entity or a relation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub table: Table,
    pub row: u32,
}

impl Slot {
    pub fn entity(row: u32) -> Self {
        Slot {
            table: Table::Entity,
            row,
        }
    }

    pub fn relation(row: u32) -> Self {
        Slot {
            table: Table::Relation,
            row,
        }
    }
}

/// Sparse gradient accumulator. Iteration order is the slot order, so
/// reductions over a buffer are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientBuffer {
    rows: BTreeMap<Slot, Vec<f64>>,
}

impl GradientBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row_mut(&mut self, slot: Slot, width: usize) -> &mut [f64] {
        self.rows.entry(slot).or_insert_with(|| vec![0.0; width])
    }

    pub fn get(&self, slot: &Slot) -> Option<&[f64]> {
        self.rows.get(slot).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Slot, &Vec<f64>)> {
        self.rows.iter()
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.rows.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Adds `scale * other` into this buffer.
    pub fn merge_scaled(&mut self, other: &GradientBuffer, scale: f64) {
        for (slot, g) in &other.rows {
            let row = self.row_mut(*slot, g.len());
            for (a, b) in row.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
    }

    /// Marks `slot` as touched without changing its gradient.
    pub fn touch(&mut self, slot: Slot, width: usize) {
        self.row_mut(slot, width);
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.values().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    kind: ModelKind,
    dim: usize,
    num_entities: usize,
    num_relations: usize,
    seed: u64,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// `log(sigmoid(x))` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl EmbeddingModel {
    /// Uniform initialization on `[-6/sqrt(dim), 6/sqrt(dim)]`.
    pub fn init(kind: ModelKind, dim: usize, num_entities: usize, num_relations: usize, seed: u64) -> Result<Self> {
        if num_entities == 0 || num_relations == 0 {
            return Err(Error::InvalidArgument(
                "a model needs at least one entity and one relation".into(),
            ));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let bound = 6.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let entities = draw(num_entities * kind.entity_width(dim));
        let relations = draw(num_relations * kind.relation_width(dim));
        Ok(EmbeddingModel {
            kind,
            dim,
            num_entities,
            num_relations,
            seed,
            entities,
            relations,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn width(&self, table: Table) -> usize {
        match table {
            Table::Entity => self.kind.entity_width(self.dim),
            Table::Relation => self.kind.relation_width(self.dim),
        }
    }

    pub fn params(&self, slot: Slot) -> &[f64] {
        let w = self.width(slot.table);
        let start = slot.row as usize * w;
        match slot.table {
            Table::Entity => &self.entities[start..start + w],
            Table::Relation => &self.relations[start..start + w],
        }
    }

    pub fn params_mut(&mut self, slot: Slot) -> &mut [f64] {
        let w = self.width(slot.table);
        let start = slot.row as usize * w;
        match slot.table {
            Table::Entity => &mut self.entities[start..start + w],
            Table::Relation => &mut self.relations[start..start + w],
        }
    }

    /// Slots read when scoring `t`.
    pub fn slots_of(&self, t: &Triplet) -> [Slot; 3] {
        [
            Slot::entity(t.subject.0),
            Slot::relation(t.relation.0),
            Slot::entity(t.object.0),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|v| v.is_finite())
    }

    pub fn check_triplet(&self, t: &Triplet) -> Result<()> {
        if t.subject.index() >= self.num_entities || t.object.index() >= self.num_entities {
            return Err(Error::UnknownEntity(t.to_string()));
        }
        if t.relation.index() >= self.num_relations {
            return Err(Error::UnknownRelation(t.to_string()));
        }
        Ok(())
    }

    pub fn score(&self, t: &Triplet) -> f64 {
        let [s, r, o] = self.slots_of(t).map(|slot| self.params(slot));
        let d = self.dim;
        match self.kind {
            ModelKind::DistMult => (0..d).map(|i| s[i] * r[i] * o[i]).sum(),
            ModelKind::ComplEx => {
                let (sa, sb) = s.split_at(d);
                let (ra, rb) = r.split_at(d);
                let (oa, ob) = o.split_at(d);
                (0..d)
                    .map(|i| ra[i] * (sa[i] * oa[i] + sb[i] * ob[i]) + rb[i] * (sa[i] * ob[i] - sb[i] * oa[i]))
                    .sum()
            }
            ModelKind::SimplE => {
                let (hs, ts) = s.split_at(d);
                let (ho, to) = o.split_at(d);
                let (rf, ri) = r.split_at(d);
                let fwd: f64 = (0..d).map(|i| hs[i] * rf[i] * to[i]).sum();
                let inv: f64 = (0..d).map(|i| ho[i] * ri[i] * ts[i]).sum();
                0.5 * (fwd + inv)
            }
            ModelKind::TransE => -(0..d)
                .map(|i| {
                    let v = s[i] + r[i] - o[i];
                    v * v
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `sigmoid(score)`, clamped to stay inside (0, 1).
    pub fn probability(&self, t: &Triplet) -> f64 {
        sigmoid(self.score(t))
    }

    /// Adds `upstream * d score / d params` into `buf` for the three slots of `t`.
    pub fn accumulate_score_grad(&self, t: &Triplet, upstream: f64, buf: &mut GradientBuffer) {
        let slots = self.slots_of(t);
        let [s, r, o] = slots.map(|slot| self.params(slot));
        let d = self.dim;
        let ew = self.width(Table::Entity);
        let rw = self.width(Table::Relation);
        let mut gs = vec![0.0; ew];
        let mut gr = vec![0.0; rw];
        let mut go = vec![0.0; ew];
        match self.kind {
            ModelKind::DistMult => {
                for i in 0..d {
                    gs[i] = r[i] * o[i];
                    gr[i] = s[i] * o[i];
                    go[i] = s[i] * r[i];
                }
            }
            ModelKind::ComplEx => {
                let (sa, sb) = s.split_at(d);
                let (ra, rb) = r.split_at(d);
                let (oa, ob) = o.split_at(d);
                for i in 0..d {
                    gs[i] = ra[i] * oa[i] + rb[i] * ob[i];
                    gs[d + i] = ra[i] * ob[i] - rb[i] * oa[i];
                    gr[i] = sa[i] * oa[i] + sb[i] * ob[i];
                    gr[d + i] = sa[i] * ob[i] - sb[i] * oa[i];
                    go[i] = ra[i] * sa[i] - rb[i] * sb[i];
                    go[d + i] = ra[i] * sb[i] + rb[i] * sa[i];
                }
            }
            ModelKind::SimplE => {
                let (hs, ts) = s.split_at(d);
                let (ho, to) = o.split_at(d);
                let (rf, ri) = r.split_at(d);
                for i in 0..d {
                    gs[i] = 0.5 * rf[i] * to[i];
                    gs[d + i] = 0.5 * ho[i] * ri[i];
                    go[i] = 0.5 * ri[i] * ts[i];
                    go[d + i] = 0.5 * hs[i] * rf[i];
                    gr[i] = 0.5 * hs[i] * to[i];
                    gr[d + i] = 0.5 * ho[i] * ts[i];
                }
            }
            ModelKind::TransE => {
                let v: Vec<f64> = (0..d).map(|i| s[i] + r[i] - o[i]).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                // zero distance: use the zero subgradient
                if norm > 0.0 {
                    for i in 0..d {
                        let u = v[i] / norm;
                        gs[i] = -u;
                        gr[i] = -u;
                        go[i] = u;
                    }
                }
            }
        }
        for (slot, g) in slots.into_iter().zip([gs, gr, go]) {
            let row = buf.row_mut(slot, g.len());
            for (a, b) in row.iter_mut().zip(&g) {
                *a += upstream * b;
            }
        }
    }

    /// `coeff * ‖θ‖²` over the slots present in `buf`, adding `2 coeff θ` to
    /// their gradients.
    pub fn l2_penalty_and_grad(&self, buf: &mut GradientBuffer, coeff: f64) -> f64 {
        if coeff == 0.0 {
            return 0.0;
        }
        let mut penalty = 0.0;
        for (slot, g) in buf.rows.iter_mut() {
            let p = self.params(*slot);
            for (gi, pi) in g.iter_mut().zip(p) {
                penalty += coeff * pi * pi;
                *gi += 2.0 * coeff * pi;
            }
        }
        penalty
    }

    /// Every slot in the model, in table order.
    pub fn all_slots(&self) -> impl Iterator<Item = Slot> + '_ {
        (0..self.num_entities as u32)
            .map(Slot::entity)
            .chain((0..self.num_relations as u32).map(Slot::relation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Triplet;
    use rand::Rng;

    fn model(kind: ModelKind, dim: usize) -> EmbeddingModel {
        EmbeddingModel::init(kind, dim, 6, 3, 42).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = model(ModelKind::ComplEx, 64);
        let b = model(ModelKind::ComplEx, 64);
        assert_eq!(a, b);
        let dm = EmbeddingModel::init(ModelKind::DistMult, 64, 10, 2, 1).unwrap();
        let bound = 6.0 / 8.0;
        for slot in dm.all_slots() {
            let p = dm.params(slot);
            assert_eq!(p.len(), 64);
            assert!(p.iter().all(|v| v.abs() <= bound));
        }
        assert!(EmbeddingModel::init(ModelKind::DistMult, 8, 0, 1, 0).is_err());
        assert!(EmbeddingModel::init(ModelKind::DistMult, 8, 1, 0, 0).is_err());
    }

    #[test]
    fn init_mean_is_centered() {
        // 100_000 components: 1000 entities x 100 dims
        let m = EmbeddingModel::init(ModelKind::DistMult, 100, 1000, 1, 9).unwrap();
        let n = 1000 * 100;
        let mean: f64 = m.entities.iter().sum::<f64>() / n as f64;
        let bound = 6.0 / 10.0;
        let sigma_mean = bound / 3f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}, sigma {sigma_mean}");
    }

    fn zeroed(kind: ModelKind) -> EmbeddingModel {
        let mut m = model(kind, 4);
        m.entities.iter_mut().for_each(|v| *v = 0.0);
        m.relations.iter_mut().for_each(|v| *v = 0.0);
        m
    }

    #[test]
    fn distmult_at_origin_scores_zero() {
        assert_eq!(zeroed(ModelKind::DistMult).score(&Triplet::new(0, 0, 1)), 0.0);
    }

    #[test]
    fn simple_hand_arithmetic() {
        let mut m = EmbeddingModel::init(ModelKind::SimplE, 1, 2, 1, 0).unwrap();
        // entity rows are [head, tail]
        m.params_mut(Slot::entity(0)).copy_from_slice(&[2.0, 2.0]); // h_s = 2, t_s = 2
        m.params_mut(Slot::entity(1)).copy_from_slice(&[1.0, 1.0]); // h_o = 1, t_o = 1
        m.params_mut(Slot::relation(0)).copy_from_slice(&[3.0, 1.0]); // r = 3, r_inv = 1
        assert_eq!(m.score(&Triplet::new(0, 0, 1)), 4.0);
    }

    #[test]
    fn complex_without_imaginary_parts_is_distmult() {
        let mut c = model(ModelKind::ComplEx, 8);
        let mut d = EmbeddingModel::init(ModelKind::DistMult, 8, 6, 3, 0).unwrap();
        for slot in c.all_slots().collect::<Vec<_>>() {
            let row = c.params_mut(slot);
            row[8..].iter_mut().for_each(|v| *v = 0.0);
            let re = row[..8].to_vec();
            d.params_mut(slot).copy_from_slice(&re);
        }
        for s in 0..6 {
            for r in 0..3 {
                for o in 0..6 {
                    let t = Triplet::new(s, r, o);
                    assert!((c.score(&t) - d.score(&t)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn probability_values() {
        let m = zeroed(ModelKind::DistMult);
        assert_eq!(m.probability(&Triplet::new(0, 0, 1)), 0.5);
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-15);
        assert!(sigmoid(1e6) < 1.0);
        assert!(sigmoid(-1e6) > 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn distmult_zero_object_has_zero_grads() {
        let mut m = model(ModelKind::DistMult, 4);
        m.params_mut(Slot::entity(1)).iter_mut().for_each(|v| *v = 0.0);
        let mut buf = GradientBuffer::new();
        m.accumulate_score_grad(&Triplet::new(0, 0, 1), 1.0, &mut buf);
        assert!(buf.get(&Slot::entity(0)).unwrap().iter().all(|&v| v == 0.0));
        assert!(buf.get(&Slot::relation(0)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transe_zero_distance_subgradient() {
        let mut m = model(ModelKind::TransE, 4);
        let s = m.params(Slot::entity(0)).to_vec();
        let r = m.params(Slot::relation(0)).to_vec();
        let o: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a + b).collect();
        m.params_mut(Slot::entity(1)).copy_from_slice(&o);
        let t = Triplet::new(0, 0, 1);
        assert!(m.score(&t).abs() < 1e-12);
        let mut buf = GradientBuffer::new();
        m.accumulate_score_grad(&t, 1.0, &mut buf);
        assert_eq!(buf.max_abs(), 0.0);
    }

    fn numeric_grad(m: &EmbeddingModel, t: &Triplet, slot: Slot, i: usize, h: f64) -> f64 {
        let mut p = m.clone();
        p.params_mut(slot)[i] += h;
        let up = p.score(t);
        p.params_mut(slot)[i] -= 2.0 * h;
        let down = p.score(t);
        (up - down) / (2.0 * h)
    }

    #[test]
    fn score_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for kind in ModelKind::ALL {
            for draw in 0..100 {
                let m = EmbeddingModel::init(kind, 5, 4, 2, draw).unwrap();
                let t = Triplet::new(rng.random_range(0..4), rng.random_range(0..2), rng.random_range(0..4));
                let mut buf = GradientBuffer::new();
                m.accumulate_score_grad(&t, 1.0, &mut buf);
                for (slot, g) in buf.iter() {
                    for (i, &analytic) in g.iter().enumerate() {
                        let numeric = numeric_grad(&m, &t, *slot, i, 1e-5);
                        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                        assert!(err < 1e-4, "{kind} {slot:?}[{i}]: {analytic} vs {numeric}");
                    }
                }
            }
        }
    }

    #[test]
    fn l2_penalty_cases() {
        let mut m = EmbeddingModel::init(ModelKind::DistMult, 2, 1, 1, 0).unwrap();
        m.params_mut(Slot::entity(0)).copy_from_slice(&[1.0, 1.0]);
        let mut buf = GradientBuffer::new();
        buf.touch(Slot::entity(0), 2);
        assert_eq!(m.l2_penalty_and_grad(&mut buf.clone(), 0.0), 0.0);
        let p = m.l2_penalty_and_grad(&mut buf, 0.001);
        assert!((p - 0.002).abs() < 1e-15);
        assert_eq!(buf.get(&Slot::entity(0)).unwrap(), &[0.002, 0.002]);
    }

    #[test]
    fn l2_penalty_restricted_to_touched_slots() {
        let m = EmbeddingModel::init(ModelKind::ComplEx, 3, 5, 2, 8).unwrap();
        let touched = [Slot::entity(1), Slot::entity(4), Slot::relation(0)];
        let mut buf = GradientBuffer::new();
        for s in touched {
            buf.touch(s, m.width(s.table));
        }
        let got = m.l2_penalty_and_grad(&mut buf, 0.01);
        let dense: f64 = m
            .all_slots()
            .filter(|s| touched.contains(s))
            .flat_map(|s| m.params(s).to_vec())
            .map(|v| 0.01 * v * v)
            .sum();
        assert!((got - dense).abs() < 1e-12);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ComplEx".parse::<ModelKind>().unwrap(), ModelKind::ComplEx);
        assert!("analogy".parse::<ModelKind>().is_err());
    }
}
