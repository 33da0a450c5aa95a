use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::panoptic::{ClassCatalog, ClassId, LabelMap, SegmentKey};

use super::centers::find_centers;
use super::grouping::group_instances;
use super::heads::{FusionParams, HeadOutputs};

/// Fused prediction plus per-instance confidence (the score of the seed
/// center).
#[derive(Debug, Clone, PartialEq)]
pub struct Panoptic {
    pub labels: LabelMap,
    pub scores: BTreeMap<SegmentKey, f32>,
}

fn argmax(row: &[f32], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (c, &p) in row.iter().enumerate() {
        if allowed(c) && best.is_none_or(|(_, b)| p > b) {
            best = Some((c, p));
        }
    }
    best.map(|(c, _)| c)
}

/// Majority-vote fusion. Returns the label map and, for every surviving
/// instance id of `instances`, the segment it became.
fn fuse_inner(
    sem_probs: &[f32],
    width: usize,
    height: usize,
    instances: &[u32],
    params: &FusionParams,
    catalog: &ClassCatalog,
) -> Result<(LabelMap, BTreeMap<u32, SegmentKey>)> {
    let n = width * height;
    let c = catalog.len();
    if sem_probs.len() != n * c || instances.len() != n {
        return Err(Error::Input(format!(
            "fusion inputs disagree: {} probabilities, {} instance ids for {width}x{height}x{c}",
            sem_probs.len(),
            instances.len()
        )));
    }
    let eval = |k: usize| catalog.is_eval(k as ClassId);
    let stuff = |k: usize| catalog.is_eval(k as ClassId) && catalog.is_stuff(k as ClassId);
    let rows = || sem_probs.chunks_exact(c);
    let top: Vec<Option<usize>> = rows().map(|r| argmax(r, eval)).collect();
    let top_stuff: Vec<Option<usize>> = rows().map(|r| argmax(r, stuff)).collect();

    // votes[instance][class]
    let mut votes: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for i in 0..n {
        if instances[i] > 0 {
            if let Some(k) = top[i] {
                votes.entry(instances[i]).or_insert_with(|| vec![0; c])[k] += 1;
            }
        }
    }
    let mut winner: BTreeMap<u32, ClassId> = BTreeMap::new();
    for (id, counts) in &votes {
        let mut best = 0usize;
        for k in 1..c {
            if counts[k] > counts[best] {
                best = k;
            }
        }
        // Stuff majorities dissolve into stuff.
        if catalog.is_thing(best as ClassId) {
            winner.insert(*id, best as ClassId);
        }
    }

    // Instance ids per class in center order.
    let mut next: BTreeMap<ClassId, u32> = BTreeMap::new();
    let mut origin: BTreeMap<u32, SegmentKey> = BTreeMap::new();
    for (id, class) in &winner {
        let k = next.entry(*class).or_insert(0);
        *k += 1;
        origin.insert(*id, (*class, *k));
    }

    let void = catalog.void_id();
    let mut sem = vec![void; n];
    let mut inst = vec![0u32; n];
    for i in 0..n {
        if let Some(&(class, k)) = origin.get(&instances[i]) {
            sem[i] = class;
            inst[i] = k;
        } else if let Some(s) = top_stuff[i] {
            sem[i] = s as ClassId;
        }
    }
    let mut stuff_area: BTreeMap<ClassId, u64> = BTreeMap::new();
    for (&s, &k) in sem.iter().zip(&inst) {
        if k == 0 && s != void {
            *stuff_area.entry(s).or_insert(0) += 1;
        }
    }
    for (s, k) in sem.iter_mut().zip(&inst) {
        if *k == 0 && *s != void && stuff_area[s] < params.stuff_area_min {
            *s = void;
        }
    }
    Ok((LabelMap::from_parts(width, height, sem, inst)?, origin))
}

/// Combines semantic probabilities (`H·W·C`, catalog order) with an
/// instance id map into a valid panoptic label map.
pub fn fuse(
    sem_probs: &[f32],
    width: usize,
    height: usize,
    instances: &[u32],
    params: &FusionParams,
    catalog: &ClassCatalog,
) -> Result<LabelMap> {
    fuse_inner(sem_probs, width, height, instances, params, catalog).map(|(m, _)| m)
}

/// `find_centers → group_instances → fuse`.
pub fn fuse_from_heads(h: &HeadOutputs, params: &FusionParams, catalog: &ClassCatalog) -> Result<Panoptic> {
    params.check()?;
    if h.n_classes() != catalog.len() {
        return Err(Error::Input(format!(
            "heads carry {} classes, catalog has {}",
            h.n_classes(),
            catalog.len()
        )));
    }
    let (w, ht) = (h.width(), h.height());
    let centers = find_centers(h.center(), w, ht, params);
    let thing_mask: Vec<bool> = (0..w * ht)
        .map(|i| {
            argmax(h.probs_at(i), |k| catalog.is_eval(k as ClassId)).is_some_and(|k| catalog.is_thing(k as ClassId))
        })
        .collect();
    let instances = group_instances(h.offset(), w, ht, &centers, &thing_mask);
    let (labels, origin) = fuse_inner(h.sem_probs(), w, ht, &instances, params, catalog)?;
    let scores = origin
        .into_iter()
        .map(|(id, key)| (key, centers[id as usize - 1].score))
        .collect();
    Ok(Panoptic { labels, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::oracle_heads;
    use crate::metrics::evaluate_pair;
    use crate::panoptic::validate;

    fn one_hot(classes: &[ClassId], n: usize) -> Vec<f32> {
        let mut v = vec![0.0; classes.len() * n];
        for (i, &c) in classes.iter().enumerate() {
            v[i * n + c as usize] = 1.0;
        }
        v
    }

    #[test]
    fn instance_takes_majority_thing_class() {
        let cat = ClassCatalog::desk();
        let car = cat.id_of("car").unwrap();
        let person = cat.id_of("person").unwrap();
        let mut classes = vec![car; 6];
        classes.extend([person; 4]);
        let probs = one_hot(&classes, cat.len());
        let inst = vec![1u32; 10];
        let p = FusionParams { stuff_area_min: 0, ..Default::default() };
        let map = fuse(&probs, 10, 1, &inst, &p, &cat).unwrap();
        assert!(map.sem().iter().all(|&s| s == car));
        assert!(map.inst().iter().all(|&k| k == 1));
    }

    #[test]
    fn all_road_without_centers_is_one_stuff_segment() {
        let cat = ClassCatalog::desk();
        let probs = one_hot(&[0; 12], cat.len());
        let map = fuse(&probs, 4, 3, &[0; 12], &FusionParams::for_dims(4, 3), &cat).unwrap();
        assert!(map.sem().iter().all(|&s| s == 0));
        assert_eq!(map.segment_areas(cat.void_id()).len(), 1);
    }

    #[test]
    fn small_stuff_becomes_void() {
        let cat = ClassCatalog::desk();
        let mut classes = vec![0; 10];
        classes[9] = 6;
        let probs = one_hot(&classes, cat.len());
        let p = FusionParams { stuff_area_min: 2, ..Default::default() };
        let map = fuse(&probs, 10, 1, &[0; 10], &p, &cat).unwrap();
        assert_eq!(map.sem()[9], cat.void_id());
        assert_eq!(map.sem()[0], 0);
    }

    #[test]
    fn unassigned_thing_pixels_fall_back_to_stuff() {
        let cat = ClassCatalog::desk();
        let car = cat.id_of("car").unwrap();
        let mut probs = one_hot(&[car, 0], cat.len());
        probs[6] = 0.0; // keep sky out
        probs[1] = 0.0;
        // pixel 0: car 1.0 but sidewalk is its best stuff class
        probs[0] = 0.0;
        probs[car as usize] = 0.7;
        probs[1] = 0.3;
        let map = fuse(&probs, 2, 1, &[0, 0], &FusionParams { stuff_area_min: 0, ..Default::default() }, &cat).unwrap();
        assert_eq!(map.sem(), &[1, 0]);
    }

    #[test]
    fn stuff_majority_dissolves_instance() {
        let cat = ClassCatalog::desk();
        let car = cat.id_of("car").unwrap();
        let probs = one_hot(&[0, 0, car], cat.len());
        let map = fuse(&probs, 3, 1, &[1, 1, 1], &FusionParams { stuff_area_min: 0, ..Default::default() }, &cat).unwrap();
        assert!(validate(&map, &cat).is_pass());
        assert_eq!(map.inst(), &[0, 0, 0]);
    }

    #[test]
    fn oracle_heads_reconstruct_ground_truth() {
        let cat = ClassCatalog::desk();
        let car = cat.id_of("car").unwrap();
        let mut sem = vec![0u8; 12 * 8];
        let mut inst = vec![0u32; 12 * 8];
        for y in 1..4 {
            for x in 1..4 {
                sem[y * 12 + x] = car;
                inst[y * 12 + x] = 1;
            }
            for x in 7..11 {
                sem[y * 12 + x] = car;
                inst[y * 12 + x] = 2;
            }
        }
        let gt = LabelMap::from_parts(12, 8, sem, inst).unwrap();
        let heads = oracle_heads(&gt, &cat);
        let out = fuse_from_heads(&heads, &FusionParams { stuff_area_min: 0, ..Default::default() }, &cat).unwrap();
        assert_eq!(out.labels, gt);
        assert_eq!(out.scores.len(), 2);

        // Suppress the second car's seed: its pixels join the first car.
        let mut h2 = heads.clone();
        let seed = h2.center().iter().rposition(|&v| v == 1.0).unwrap();
        h2.set_center(seed, 0.0);
        let out2 = fuse_from_heads(&h2, &FusionParams { stuff_area_min: 0, ..Default::default() }, &cat).unwrap();
        let cars: Vec<u32> = (0..gt.len()).filter(|&i| gt.sem()[i] == car).map(|i| out2.labels.inst()[i]).collect();
        assert!(cars.iter().all(|&k| k == 1));
        let r = evaluate_pair(&out.labels, &gt, &cat).unwrap();
        assert_eq!(r.pq.all, Some(100.0));
    }

    #[test]
    fn all_void_ground_truth_fuses_to_void() {
        let cat = ClassCatalog::desk();
        let gt = LabelMap::void(6, 4, cat.void_id());
        let heads = oracle_heads(&gt, &cat);
        // uniform probabilities pick road, which is below the stuff area
        let p = FusionParams { stuff_area_min: 25, ..Default::default() };
        let out = fuse_from_heads(&heads, &p, &cat).unwrap();
        assert_eq!(out.labels, gt);
    }
}
