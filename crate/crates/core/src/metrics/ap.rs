//! COCO-style mask average precision.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::panoptic::{ClassCatalog, ClassId, LabelMap, SegmentKey};

/// IoU thresholds 0.50:0.05:0.95, in percent so comparisons stay integral.
pub const AP_THRESHOLDS_PCT: [u64; 10] = [50, 55, 60, 65, 70, 75, 80, 85, 90, 95];

const RECALL_POINTS: u64 = 101;

/// A scored instance mask. `id` breaks score ties (lower first).
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrediction {
    pub id: u32,
    pub class: ClassId,
    pub score: f32,
    /// Row-major pixel indices.
    pub pixels: Vec<u32>,
}

/// One prediction after per-image matching; `matched[t]` says whether it was
/// a true positive at threshold `AP_THRESHOLDS_PCT[t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub score: f32,
    pub image_key: u64,
    pub id: u32,
    pub matched: [bool; 10],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassDetections {
    pub n_gt: u64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApTally {
    pub classes: BTreeMap<ClassId, ClassDetections>,
}

/// Thing segments of a label map as instance predictions, ids in first
/// occurrence order. Segments missing from `scores` get score 1.
pub fn instances_from_labels(
    map: &LabelMap,
    catalog: &ClassCatalog,
    scores: &BTreeMap<SegmentKey, f32>,
) -> Vec<InstancePrediction> {
    let order = map.segments_in_scan_order(catalog.void_id());
    let mut index: BTreeMap<SegmentKey, usize> = BTreeMap::new();
    let mut out: Vec<InstancePrediction> = Vec::new();
    for key in order {
        if catalog.is_thing(key.0) && catalog.is_eval(key.0) {
            index.insert(key, out.len());
            out.push(InstancePrediction {
                id: out.len() as u32 + 1,
                class: key.0,
                score: scores.get(&key).copied().unwrap_or(1.0),
                pixels: Vec::new(),
            });
        }
    }
    for i in 0..map.len() {
        if let Some(&k) = index.get(&map.key(i)) {
            out[k].pixels.push(i as u32);
        }
    }
    out
}

/// `a/b` vs `c/d` without rounding.
fn cmp_ratio(a: u64, b: u64, c: u64, d: u64) -> Ordering {
    (a as u128 * d as u128).cmp(&(c as u128 * b as u128))
}

impl ApTally {
    /// Greedy per-image matching: predictions in descending score order
    /// (ties by ascending id) take the unmatched ground-truth instance with
    /// the highest IoU, provided IoU ≥ threshold.
    pub fn add_image(&mut self, preds: &[InstancePrediction], gt: &LabelMap, catalog: &ClassCatalog, image_key: u64) {
        let mut gt_area: BTreeMap<SegmentKey, u64> = BTreeMap::new();
        for i in 0..gt.len() {
            let k = gt.key(i);
            if catalog.is_thing(k.0) && catalog.is_eval(k.0) {
                *gt_area.entry(k).or_insert(0) += 1;
            }
        }
        for k in gt_area.keys() {
            self.classes.entry(k.0).or_default().n_gt += 1;
        }

        let mut by_class: BTreeMap<ClassId, Vec<&InstancePrediction>> = BTreeMap::new();
        for p in preds {
            if catalog.is_thing(p.class) && catalog.is_eval(p.class) {
                by_class.entry(p.class).or_default().push(p);
            }
        }
        for (class, mut ps) in by_class {
            ps.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
            let gts: Vec<(SegmentKey, u64)> =
                gt_area.iter().filter(|(k, _)| k.0 == class).map(|(k, a)| (*k, *a)).collect();
            // inter[p][g]
            let inter: Vec<Vec<u64>> = ps
                .iter()
                .map(|p| {
                    let mut row = vec![0u64; gts.len()];
                    for &px in &p.pixels {
                        let k = gt.key(px as usize);
                        if let Ok(j) = gts.binary_search_by(|(g, _)| g.cmp(&k)) {
                            row[j] += 1;
                        }
                    }
                    row
                })
                .collect();
            let mut matched = vec![[false; 10]; ps.len()];
            for (t, &thr) in AP_THRESHOLDS_PCT.iter().enumerate() {
                let mut taken = vec![false; gts.len()];
                for (pi, p) in ps.iter().enumerate() {
                    let area_p = p.pixels.len() as u64;
                    let mut best: Option<(usize, u64, u64)> = None;
                    for (gi, &(_, area_g)) in gts.iter().enumerate() {
                        if taken[gi] {
                            continue;
                        }
                        let i = inter[pi][gi];
                        let u = area_p + area_g - i;
                        if u == 0 || i * 100 < thr * u {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some((_, bi, bu)) => cmp_ratio(i, u, bi, bu) == Ordering::Greater,
                        };
                        if better {
                            best = Some((gi, i, u));
                        }
                    }
                    if let Some((gi, _, _)) = best {
                        taken[gi] = true;
                        matched[pi][t] = true;
                    }
                }
            }
            let entry = self.classes.entry(class).or_default();
            for (p, m) in ps.iter().zip(matched) {
                entry.detections.push(Detection {
                    score: p.score,
                    image_key,
                    id: p.id,
                    matched: m,
                });
            }
        }
    }

    pub fn merge(&mut self, other: &ApTally) {
        for (c, d) in &other.classes {
            let e = self.classes.entry(*c).or_default();
            e.n_gt += d.n_gt;
            e.detections.extend_from_slice(&d.detections);
        }
    }

    /// `(AP, AP50)` in percent, averaged over classes with ground truth.
    pub fn finalize(&self) -> (Option<f64>, Option<f64>) {
        let mut ap_sum = 0.0;
        let mut ap50_sum = 0.0;
        let mut n = 0usize;
        for cd in self.classes.values() {
            if cd.n_gt == 0 {
                continue;
            }
            let mut dets = cd.detections.clone();
            dets.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.image_key.cmp(&b.image_key))
                    .then(a.id.cmp(&b.id))
            });
            let per_t: Vec<f64> = (0..AP_THRESHOLDS_PCT.len())
                .map(|t| interpolated_ap(&dets, t, cd.n_gt))
                .collect();
            ap_sum += per_t.iter().sum::<f64>() / per_t.len() as f64;
            ap50_sum += per_t[0];
            n += 1;
        }
        if n == 0 {
            return (None, None);
        }
        (Some(100.0 * ap_sum / n as f64), Some(100.0 * ap50_sum / n as f64))
    }
}

/// 101-point interpolated precision, as in the COCO evaluator.
fn interpolated_ap(dets: &[Detection], t: usize, n_gt: u64) -> f64 {
    let mut tps = Vec::with_capacity(dets.len());
    let mut precision = Vec::with_capacity(dets.len());
    let (mut tp, mut fp) = (0u64, 0u64);
    for d in dets {
        if d.matched[t] {
            tp += 1;
        } else {
            fp += 1;
        }
        tps.push(tp);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    let mut idx = 0usize;
    for k in 0..RECALL_POINTS {
        // first detection whose recall tp/n_gt reaches k/100
        while idx < tps.len() && tps[idx] * (RECALL_POINTS - 1) < k * n_gt {
            idx += 1;
        }
        if idx < tps.len() {
            sum += precision[idx];
        }
    }
    sum / RECALL_POINTS as f64
}

/// Mask AP and AP50 of one image's predictions against its ground truth.
pub fn instance_ap(preds: &[InstancePrediction], gt: &LabelMap, catalog: &ClassCatalog) -> (Option<f64>, Option<f64>) {
    let mut tally = ApTally::default();
    tally.add_image(preds, gt, catalog, 0);
    tally.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1×10 strip: gt car on pixels [0, 5), prediction on `pred_px`.
    fn setup(pred_px: std::ops::Range<u32>) -> (LabelMap, Vec<InstancePrediction>, ClassCatalog) {
        let cat = ClassCatalog::desk();
        let car = cat.id_of("car").unwrap();
        let mut sem = vec![0; 10];
        let mut inst = vec![0; 10];
        for i in 0..5 {
            sem[i] = car;
            inst[i] = 1;
        }
        let gt = LabelMap::from_parts(10, 1, sem, inst).unwrap();
        let pred = InstancePrediction { id: 1, class: car, score: 0.9, pixels: pred_px.collect() };
        (gt, vec![pred], cat)
    }

    #[test]
    fn exact_match_scores_100() {
        let (gt, preds, cat) = setup(0..5);
        assert_eq!(instance_ap(&preds, &gt, &cat), (Some(100.0), Some(100.0)));
    }

    #[test]
    fn iou_point_six_hits_three_thresholds() {
        // pred [0, 3) ∪ ... : use 3 of 5 pixels → IoU 3/5
        let (gt, preds, cat) = setup(0..3);
        let (ap, ap50) = instance_ap(&preds, &gt, &cat);
        assert_eq!(ap50, Some(100.0));
        assert!((ap.unwrap() - 30.0).abs() < 1e-9, "{ap:?}");
    }

    #[test]
    fn no_predictions_scores_zero() {
        let (gt, _, cat) = setup(0..0);
        assert_eq!(instance_ap(&[], &gt, &cat), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn no_ground_truth_instances_is_absent() {
        let cat = ClassCatalog::desk();
        let gt = LabelMap::from_parts(2, 1, vec![0, 0], vec![0, 0]).unwrap();
        assert_eq!(instance_ap(&[], &gt, &cat), (None, None));
    }

    #[test]
    fn higher_score_false_positive_halves_precision() {
        let (gt, mut preds, cat) = setup(0..5);
        preds.push(InstancePrediction { id: 2, class: preds[0].class, score: 0.95, pixels: vec![8, 9] });
        let (_, ap50) = instance_ap(&preds, &gt, &cat);
        assert!((ap50.unwrap() - 50.0).abs() < 1e-9);
    }
}
