use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::panoptic::{ClassCatalog, ClassId, LabelMap, SegmentKey};

/// A matched (true positive) pair. IoU is kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SegmentMatch {
    pub pred: SegmentKey,
    pub gt: SegmentKey,
    pub intersection: u64,
    /// Union with prediction pixels on void removed.
    pub union: u64,
}

impl SegmentMatch {
    pub fn iou(&self) -> f64 {
        self.intersection as f64 / self.union as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassMatches {
    pub tp: Vec<SegmentMatch>,
    pub fp: Vec<SegmentKey>,
    pub fn_: Vec<SegmentKey>,
}

/// TP/FP/FN partition per evaluation class. Every eval class of the catalog
/// has an entry, possibly empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub classes: BTreeMap<ClassId, ClassMatches>,
}

/// Unique IoU > 0.5 matching of same-class segments.
///
/// Ground-truth pixels that are void (or of a non-eval class) are dropped
/// from every union. A prediction with more than half of its area on void is
/// discarded instead of being counted as a false positive.
pub fn match_segments(pred: &LabelMap, gt: &LabelMap, catalog: &ClassCatalog) -> Result<MatchResult> {
    if !pred.same_dims(gt) {
        return Err(Error::Input(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut gt_area: BTreeMap<SegmentKey, u64> = BTreeMap::new();
    let mut pred_area: BTreeMap<SegmentKey, u64> = BTreeMap::new();
    let mut pred_on_void: HashMap<SegmentKey, u64> = HashMap::new();
    let mut overlap: HashMap<(SegmentKey, SegmentKey), u64> = HashMap::new();

    for i in 0..gt.len() {
        let g = gt.key(i);
        let p = pred.key(i);
        let g_eval = catalog.is_eval(g.0);
        let p_eval = catalog.is_eval(p.0);
        if g_eval {
            *gt_area.entry(g).or_insert(0) += 1;
        }
        if p_eval {
            *pred_area.entry(p).or_insert(0) += 1;
            if g_eval {
                *overlap.entry((p, g)).or_insert(0) += 1;
            } else {
                *pred_on_void.entry(p).or_insert(0) += 1;
            }
        }
    }

    let mut result = MatchResult::default();
    for c in catalog.eval_ids() {
        result.classes.insert(c, ClassMatches::default());
    }

    let mut gt_matched = std::collections::HashSet::new();
    let mut pred_matched = std::collections::HashSet::new();
    let mut pairs: Vec<_> = overlap.into_iter().collect();
    pairs.sort_unstable();
    for ((p, g), inter) in pairs {
        if p.0 != g.0 {
            continue;
        }
        let void = pred_on_void.get(&p).copied().unwrap_or(0);
        let union = pred_area[&p] + gt_area[&g] - inter - void;
        // IoU > 0.5 guarantees at most one partner per segment.
        if 2 * inter > union {
            gt_matched.insert(g);
            pred_matched.insert(p);
            let entry = result.classes.get_mut(&g.0).expect("eval class");
            entry.tp.push(SegmentMatch {
                pred: p,
                gt: g,
                intersection: inter,
                union,
            });
        }
    }
    for g in gt_area.keys() {
        if !gt_matched.contains(g) {
            result.classes.get_mut(&g.0).expect("eval class").fn_.push(*g);
        }
    }
    for (p, &area) in &pred_area {
        if pred_matched.contains(p) {
            continue;
        }
        let void = pred_on_void.get(p).copied().unwrap_or(0);
        if 2 * void > area {
            continue;
        }
        result.classes.get_mut(&p.0).expect("eval class").fp.push(*p);
    }
    for m in result.classes.values_mut() {
        m.tp.sort_unstable();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> ClassCatalog {
        ClassCatalog::desk()
    }

    #[test]
    fn identical_maps_match_fully() {
        let c = cat();
        let car = c.id_of("car").unwrap();
        let map = LabelMap::from_parts(4, 1, vec![0, car, car, 6], vec![0, 1, 1, 0]).unwrap();
        let m = match_segments(&map, &map, &c).unwrap();
        let tps: usize = m.classes.values().map(|c| c.tp.len()).sum();
        assert_eq!(tps, 3);
        assert!(m.classes.values().all(|c| c.fp.is_empty() && c.fn_.is_empty()));
        assert!(m.classes.values().flat_map(|c| &c.tp).all(|t| t.iou() == 1.0));
    }

    #[test]
    fn eight_pixel_cars_overlapping_six() {
        let c = cat();
        let car = c.id_of("car").unwrap();
        let road = c.id_of("road").unwrap();
        let mut gt = vec![road; 12];
        let mut pred = vec![road; 12];
        let mut gi = vec![0; 12];
        let mut pi = vec![0; 12];
        for i in 0..8 {
            gt[i] = car;
            gi[i] = 1;
            pred[i + 2] = car;
            pi[i + 2] = 1;
        }
        let gt = LabelMap::from_parts(12, 1, gt, gi).unwrap();
        let pred = LabelMap::from_parts(12, 1, pred, pi).unwrap();
        let m = match_segments(&pred, &gt, &c).unwrap();
        let tp = &m.classes[&car].tp;
        assert_eq!(tp.len(), 1);
        assert_eq!((tp[0].intersection, tp[0].union), (6, 10));
        assert_eq!(tp[0].iou(), 0.6);
    }

    #[test]
    fn empty_prediction_gives_false_negative() {
        let c = cat();
        let gt = LabelMap::from_parts(2, 1, vec![0, 0], vec![0, 0]).unwrap();
        let pred = LabelMap::void(2, 1, c.void_id());
        let m = match_segments(&pred, &gt, &c).unwrap();
        assert_eq!(m.classes[&0].fn_, vec![(0, 0)]);
        assert!(m.classes[&0].tp.is_empty() && m.classes[&0].fp.is_empty());
    }

    #[test]
    fn prediction_mostly_on_void_is_not_a_false_positive() {
        let c = cat();
        let v = c.void_id();
        let gt = LabelMap::from_parts(4, 1, vec![v, v, v, 0], vec![0; 4]).unwrap();
        let pred = LabelMap::from_parts(4, 1, vec![6, 6, 6, 0], vec![0; 4]).unwrap();
        let m = match_segments(&pred, &gt, &c).unwrap();
        assert!(m.classes[&6].fp.is_empty());
        assert_eq!(m.classes[&0].tp.len(), 1);
    }

    #[test]
    fn void_pixels_leave_the_union() {
        let c = cat();
        let v = c.void_id();
        // gt: road on 2 px, void on 1; pred: road on all 3 → IoU 2/2.
        let gt = LabelMap::from_parts(3, 1, vec![0, 0, v], vec![0; 3]).unwrap();
        let pred = LabelMap::from_parts(3, 1, vec![0, 0, 0], vec![0; 3]).unwrap();
        let m = match_segments(&pred, &gt, &c).unwrap();
        assert_eq!((m.classes[&0].tp[0].intersection, m.classes[&0].tp[0].union), (2, 2));
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let c = cat();
        let a = LabelMap::void(2, 2, 255);
        let b = LabelMap::void(2, 3, 255);
        assert!(matches!(match_segments(&a, &b, &c), Err(Error::Input(_))));
    }
}
