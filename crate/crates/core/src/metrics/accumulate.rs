use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panoptic::{ClassCatalog, ClassId, LabelMap, SegmentKey};

use super::ap::{instances_from_labels, ApTally};
use super::matching::match_segments;
use super::pq::{scores_from_tallies, tallies_from_matches, ClassTally};
use super::report::{ClassScore, GroupScores, MetricReport};
use super::semantic::ConfusionMatrix;

/// Integer tallies for one image. Nothing here is a ratio yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub catalog: String,
    pub image_key: u64,
    pub panoptic: BTreeMap<ClassId, ClassTally>,
    pub confusion: ConfusionMatrix,
    pub ap: ApTally,
}

pub fn evaluate_image(
    pred: &LabelMap,
    pred_scores: &BTreeMap<SegmentKey, f32>,
    gt: &LabelMap,
    catalog: &ClassCatalog,
    image_key: u64,
) -> Result<ImageEval> {
    let matches = match_segments(pred, gt, catalog)?;
    let mut confusion = ConfusionMatrix::new(catalog.len());
    confusion.accumulate(pred.sem(), gt.sem(), catalog);
    let mut ap = ApTally::default();
    ap.add_image(&instances_from_labels(pred, catalog, pred_scores), gt, catalog, image_key);
    Ok(ImageEval {
        catalog: catalog.fingerprint(),
        image_key,
        panoptic: tallies_from_matches(&matches),
        confusion,
        ap,
    })
}

/// Order-independent reduction of [`ImageEval`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalAccumulator {
    catalog: String,
    panoptic: BTreeMap<ClassId, ClassTally>,
    confusion: ConfusionMatrix,
    ap: ApTally,
    images: u64,
}

impl EvalAccumulator {
    pub fn new(catalog: &ClassCatalog) -> Self {
        EvalAccumulator {
            catalog: catalog.fingerprint(),
            panoptic: catalog.eval_ids().map(|c| (c, ClassTally::default())).collect(),
            confusion: ConfusionMatrix::new(catalog.len()),
            ap: ApTally::default(),
            images: 0,
        }
    }

    pub fn add(&mut self, eval: &ImageEval) -> Result<()> {
        if eval.catalog != self.catalog {
            return Err(Error::Input(format!(
                "image {} was evaluated against a different catalog",
                eval.image_key
            )));
        }
        for (c, t) in &eval.panoptic {
            self.panoptic.entry(*c).or_default().merge(t);
        }
        self.confusion.merge(&eval.confusion);
        self.ap.merge(&eval.ap);
        self.images += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &EvalAccumulator) -> Result<()> {
        if other.catalog != self.catalog {
            return Err(Error::Input("cannot merge accumulators of different catalogs".into()));
        }
        for (c, t) in &other.panoptic {
            self.panoptic.entry(*c).or_default().merge(t);
        }
        self.confusion.merge(&other.confusion);
        self.ap.merge(&other.ap);
        self.images += other.images;
        Ok(())
    }

    pub fn finalize(&self, catalog: &ClassCatalog) -> Result<MetricReport> {
        if catalog.fingerprint() != self.catalog {
            return Err(Error::Input("catalog does not match the accumulated images".into()));
        }
        let pq = scores_from_tallies(&self.panoptic, catalog);
        let per_class = catalog
            .classes()
            .iter()
            .filter(|c| c.is_eval)
            .map(|c| {
                let t = pq.per_class.get(&c.id);
                ClassScore {
                    class_id: c.id,
                    name: c.name.clone(),
                    is_thing: c.is_thing,
                    pq: t.map(|t| t.pq),
                    sq: t.map(|t| t.sq),
                    rq: t.map(|t| t.rq),
                }
            })
            .collect();
        let group = |f: fn(&super::pq::PqTriple) -> f64| GroupScores {
            all: pq.all.as_ref().map(f),
            things: pq.things.as_ref().map(f),
            stuff: pq.stuff.as_ref().map(f),
        };
        let sem = self.confusion.scores();
        let (ap, ap50) = self.ap.finalize();
        Ok(MetricReport {
            pq: group(|t| t.pq),
            sq: group(|t| t.sq),
            rq: group(|t| t.rq),
            per_class,
            miou: sem.map(|s| s.miou),
            fwiou: sem.map(|s| s.fwiou),
            macc: sem.map(|s| s.macc),
            pacc: sem.map(|s| s.pacc),
            ap,
            ap50,
            images: self.images,
        })
    }
}

/// Dataset report from per-image tallies, in any order.
pub fn aggregate<'a>(evals: impl IntoIterator<Item = &'a ImageEval>, catalog: &ClassCatalog) -> Result<MetricReport> {
    let mut acc = EvalAccumulator::new(catalog);
    for e in evals {
        acc.add(e)?;
    }
    acc.finalize(catalog)
}

/// Report for a single prediction, every instance scored 1.
pub fn evaluate_pair(pred: &LabelMap, gt: &LabelMap, catalog: &ClassCatalog) -> Result<MetricReport> {
    let eval = evaluate_image(pred, &BTreeMap::new(), gt, catalog, 0)?;
    aggregate([&eval], catalog)
}
