use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::panoptic::{ClassCatalog, ClassId};

use super::matching::MatchResult;

/// Fixed-point scale for summed IoUs. Integer sums make dataset
/// accumulation exact and independent of merge order.
const IOU_FRAC_BITS: u32 = 52;

#[inline]
pub(crate) fn iou_fixed(intersection: u64, union: u64) -> u128 {
    (((intersection as u128) << IOU_FRAC_BITS) + union as u128 / 2) / union as u128
}

/// Per-class PQ counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Sum of matched IoUs in units of 2^-52.
    pub iou_fixed: u128,
}

impl ClassTally {
    pub fn merge(&mut self, other: &ClassTally) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.iou_fixed += other.iou_fixed;
    }

    pub fn iou_sum(&self) -> f64 {
        self.iou_fixed as f64 / (1u64 << IOU_FRAC_BITS) as f64
    }

    /// `None` when the class has no segments at all.
    pub fn scores(&self) -> Option<PqTriple> {
        let denom2 = 2 * self.tp + self.fp + self.fn_;
        if denom2 == 0 {
            return None;
        }
        let iou = self.iou_sum();
        let sq = if self.tp == 0 { 0.0 } else { iou / self.tp as f64 };
        Some(PqTriple {
            pq: 100.0 * (2.0 * iou) / denom2 as f64,
            sq: 100.0 * sq,
            rq: 100.0 * (2 * self.tp) as f64 / denom2 as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqTriple {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PanopticScores {
    pub per_class: BTreeMap<ClassId, PqTriple>,
    pub all: Option<PqTriple>,
    pub things: Option<PqTriple>,
    pub stuff: Option<PqTriple>,
}

pub(crate) fn tallies_from_matches(m: &MatchResult) -> BTreeMap<ClassId, ClassTally> {
    m.classes
        .iter()
        .map(|(&c, cm)| {
            let tally = ClassTally {
                tp: cm.tp.len() as u64,
                fp: cm.fp.len() as u64,
                fn_: cm.fn_.len() as u64,
                iou_fixed: cm.tp.iter().map(|t| iou_fixed(t.intersection, t.union)).sum(),
            };
            (c, tally)
        })
        .collect()
}

fn mean(triples: &[PqTriple]) -> Option<PqTriple> {
    if triples.is_empty() {
        return None;
    }
    let n = triples.len() as f64;
    let sum = triples.iter().fold((0.0, 0.0, 0.0), |acc, t| (acc.0 + t.pq, acc.1 + t.sq, acc.2 + t.rq));
    Some(PqTriple {
        pq: sum.0 / n,
        sq: sum.1 / n,
        rq: sum.2 / n,
    })
}

/// Group scores are unweighted means over classes that have at least one
/// segment; iteration is in class-id order so the means are reproducible.
pub(crate) fn scores_from_tallies(tallies: &BTreeMap<ClassId, ClassTally>, catalog: &ClassCatalog) -> PanopticScores {
    let per_class: BTreeMap<ClassId, PqTriple> = tallies
        .iter()
        .filter(|(c, _)| catalog.is_eval(**c))
        .filter_map(|(&c, t)| t.scores().map(|s| (c, s)))
        .collect();
    let pick = |f: &dyn Fn(ClassId) -> bool| -> Vec<PqTriple> {
        per_class.iter().filter(|(c, _)| f(**c)).map(|(_, t)| *t).collect()
    };
    PanopticScores {
        all: mean(&pick(&|_| true)),
        things: mean(&pick(&|c| catalog.is_thing(c))),
        stuff: mean(&pick(&|c| !catalog.is_thing(c))),
        per_class,
    }
}

/// PQ = ΣIoU / (TP + ½FP + ½FN), SQ = ΣIoU / TP, RQ = TP / (TP + ½FP + ½FN),
/// as percentages.
pub fn panoptic_quality(m: &MatchResult, catalog: &ClassCatalog) -> PanopticScores {
    scores_from_tallies(&tallies_from_matches(m), catalog)
}
