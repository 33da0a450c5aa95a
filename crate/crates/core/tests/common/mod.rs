//! Random inputs and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use noctis::fusion::FusionParams;
use noctis::panoptic::{ClassCatalog, ClassId, LabelMap, SegmentKey};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick_class(rng: &mut impl Rng, catalog: &ClassCatalog) -> ClassId {
    let n = catalog.len();
    let k = rng.random_range(0..=n);
    if k == n {
        catalog.void_id()
    } else {
        catalog.classes()[k].id
    }
}

fn key_for(rng: &mut impl Rng, catalog: &ClassCatalog, class: ClassId) -> (ClassId, u32) {
    if catalog.is_thing(class) {
        (class, rng.random_range(1..=3))
    } else {
        (class, 0)
    }
}

/// A valid map made of layered rectangles plus sparse pixel noise. Covers
/// things, stuff and void.
pub fn random_map(rng: &mut impl Rng, w: usize, h: usize, catalog: &ClassCatalog) -> LabelMap {
    let bg = pick_class(rng, catalog);
    let bg = key_for(rng, catalog, bg);
    let mut sem = vec![bg.0; w * h];
    let mut inst = vec![bg.1; w * h];
    for _ in 0..rng.random_range(1..8) {
        let class = pick_class(rng, catalog);
        let (c, id) = key_for(rng, catalog, class);
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0..w), rng.random_range(y0..h));
        for y in y0..=y1 {
            for x in x0..=x1 {
                sem[y * w + x] = c;
                inst[y * w + x] = id;
            }
        }
    }
    for i in 0..w * h {
        if rng.random_bool(0.03) {
            let class = pick_class(rng, catalog);
            let (c, id) = key_for(rng, catalog, class);
            sem[i] = c;
            inst[i] = id;
        }
    }
    LabelMap::from_parts(w, h, sem, inst).unwrap()
}

/// A prediction that overlaps `gt`: a few rectangles repainted, instance
/// ids shuffled and some pixel noise.
pub fn perturb(rng: &mut impl Rng, gt: &LabelMap, catalog: &ClassCatalog) -> LabelMap {
    let (w, h) = (gt.width(), gt.height());
    let relabel: Vec<u32> = {
        let mut v = vec![1u32, 2, 3, 4];
        for i in (1..v.len()).rev() {
            let j = rng.random_range(0..=i);
            v.swap(i, j);
        }
        v
    };
    let mut sem = gt.sem().to_vec();
    let mut inst: Vec<u32> = gt.inst().iter().map(|&i| if i == 0 { 0 } else { relabel[(i as usize - 1) % 4] }).collect();
    for _ in 0..rng.random_range(0..4) {
        let class = pick_class(rng, catalog);
        let (c, id) = key_for(rng, catalog, class);
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0..w).min(x0 + w / 2), rng.random_range(y0..h).min(y0 + h / 2));
        for y in y0..=y1 {
            for x in x0..=x1 {
                sem[y * w + x] = c;
                inst[y * w + x] = id;
            }
        }
    }
    for i in 0..w * h {
        if rng.random_bool(0.05) {
            let class = pick_class(rng, catalog);
            let (c, id) = key_for(rng, catalog, class);
            sem[i] = c;
            inst[i] = id;
        }
    }
    LabelMap::from_parts(w, h, sem, inst).unwrap()
}

/// Brute-force matching result.
#[derive(Debug, Default)]
pub struct OracleMatch {
    /// (pred, gt, intersection, union)
    pub tp: BTreeSet<(SegmentKey, SegmentKey, u64, u64)>,
    pub fp: BTreeSet<SegmentKey>,
    pub fn_: BTreeSet<SegmentKey>,
    /// Percent PQ, SQ, RQ per class with at least one segment.
    pub per_class: BTreeMap<ClassId, (f64, f64, f64)>,
}

fn segments(map: &LabelMap, catalog: &ClassCatalog) -> BTreeSet<SegmentKey> {
    (0..map.len()).map(|i| map.key(i)).filter(|k| catalog.is_eval(k.0)).collect()
}

/// Every same-class pair is scored by scanning the whole map.
pub fn oracle_match(pred: &LabelMap, gt: &LabelMap, catalog: &ClassCatalog) -> OracleMatch {
    let ps = segments(pred, catalog);
    let gs = segments(gt, catalog);
    let n = gt.len();
    let mut out = OracleMatch::default();
    let mut matched_p = BTreeSet::new();
    let mut matched_g = BTreeSet::new();
    for &p in &ps {
        for &g in &gs {
            if p.0 != g.0 {
                continue;
            }
            let mut inter = 0u64;
            let mut union = 0u64;
            for i in 0..n {
                let in_p = pred.key(i) == p;
                let in_g = gt.key(i) == g;
                let gt_void = !catalog.is_eval(gt.key(i).0);
                if in_p && in_g {
                    inter += 1;
                }
                if (in_p && !gt_void) || in_g {
                    union += 1;
                }
            }
            if inter * 2 > union {
                out.tp.insert((p, g, inter, union));
                matched_p.insert(p);
                matched_g.insert(g);
            }
        }
    }
    for &p in &ps {
        if matched_p.contains(&p) {
            continue;
        }
        let area = (0..n).filter(|&i| pred.key(i) == p).count();
        let on_void = (0..n).filter(|&i| pred.key(i) == p && !catalog.is_eval(gt.key(i).0)).count();
        if on_void * 2 <= area {
            out.fp.insert(p);
        }
    }
    for &g in &gs {
        if !matched_g.contains(&g) {
            out.fn_.insert(g);
        }
    }
    for c in catalog.eval_ids() {
        let tps: Vec<f64> = out
            .tp
            .iter()
            .filter(|t| t.1 .0 == c)
            .map(|t| t.2 as f64 / t.3 as f64)
            .collect();
        let fp = out.fp.iter().filter(|k| k.0 == c).count() as f64;
        let fn_ = out.fn_.iter().filter(|k| k.0 == c).count() as f64;
        let tp = tps.len() as f64;
        if tp + fp + fn_ == 0.0 {
            continue;
        }
        let iou: f64 = tps.iter().sum();
        let denom = tp + 0.5 * fp + 0.5 * fn_;
        let sq = if tp > 0.0 { iou / tp } else { 0.0 };
        out.per_class.insert(c, (100.0 * iou / denom, 100.0 * sq, 100.0 * tp / denom));
    }
    out
}

/// mIoU, fwIoU, mACC, pACC over pixels whose ground truth is an eval class.
pub fn oracle_semantic(pred: &[ClassId], gt: &[ClassId], catalog: &ClassCatalog) -> Option<[f64; 4]> {
    let valid: Vec<usize> = (0..gt.len()).filter(|&i| catalog.is_eval(gt[i])).collect();
    if valid.is_empty() {
        return None;
    }
    let total = valid.len() as u64;
    let (mut iou_sum, mut acc_sum, mut fw_sum, mut present, mut correct) = (0.0, 0.0, 0.0, 0usize, 0u64);
    for c in catalog.eval_ids() {
        let tp = valid.iter().filter(|&&i| gt[i] == c && pred[i] == c).count() as u64;
        let fn_ = valid.iter().filter(|&&i| gt[i] == c && pred[i] != c).count() as u64;
        let fp = valid.iter().filter(|&&i| gt[i] != c && pred[i] == c).count() as u64;
        correct += tp;
        if tp + fn_ == 0 {
            continue;
        }
        present += 1;
        let iou = tp as f64 / (tp + fn_ + fp) as f64;
        iou_sum += iou;
        acc_sum += tp as f64 / (tp + fn_) as f64;
        fw_sum += (tp + fn_) as f64 * iou;
    }
    Some([
        100.0 * iou_sum / present as f64,
        100.0 * fw_sum / total as f64,
        100.0 * acc_sum / present as f64,
        100.0 * correct as f64 / total as f64,
    ])
}

/// Peaks of a heatmap by checking each pixel against its full clipped
/// window, then threshold, sort and truncate.
pub fn oracle_centers(heat: &[f32], w: usize, h: usize, p: &FusionParams) -> Vec<(usize, usize, f32)> {
    let r = (p.nms_kernel / 2) as isize;
    let mut out = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = heat[(y as usize) * w + x as usize];
            let mut is_max = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y + dy, x + dx);
                    if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w && heat[yy as usize * w + xx as usize] > v {
                        is_max = false;
                    }
                }
            }
            if is_max && v > 0.0 && v >= p.center_threshold {
                out.push((y as usize, x as usize, v));
            }
        }
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    out.truncate(p.top_k);
    out
}

/// A heatmap with plateaus: values drawn from a handful of levels.
pub fn random_heat(rng: &mut impl Rng, w: usize, h: usize) -> Vec<f32> {
    let levels = [0.0f32, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
    (0..w * h)
        .map(|_| {
            if rng.random_bool(0.5) {
                levels[rng.random_range(0..levels.len())]
            } else {
                rng.random_range(0.0f32..1.0)
            }
        })
        .collect()
}
