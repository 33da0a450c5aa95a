//! Property tests over random label maps, heatmaps and models.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use noctis::fusion::{find_centers, FusionParams};
use noctis::learner::{featurize, losses, make_targets, forward, LossWeights, SegModel, TargetParams};
use noctis::metrics::{aggregate, evaluate_image, match_segments, EvalAccumulator};
use noctis::nightshift::{select_subset, subset_size};
use noctis::panoptic::{decode_panoptic, encode_panoptic, id_to_rgb, rgb_to_id, ClassCatalog};
use noctis::scenegen::{compose_scene, render, LightingSpec, SceneConfig};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn catalog(cityscapes: bool) -> ClassCatalog {
    if cityscapes {
        ClassCatalog::cityscapes()
    } else {
        ClassCatalog::desk()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rgb_id_round_trip(id in 0u32..(1 << 24)) {
        prop_assert_eq!(rgb_to_id(id_to_rgb(id)), id);
    }

    #[test]
    fn codec_round_trip_is_canonical(seed in any::<u64>(), w in 1usize..40, h in 1usize..40, cs in any::<bool>()) {
        let cat = catalog(cs);
        let map = random_map(&mut rng(seed), w, h, &cat);
        let (img, meta) = encode_panoptic(&map, &cat).unwrap();
        let back = decode_panoptic(&img, &meta, &cat).unwrap();
        prop_assert_eq!(back, map.canonicalize(&cat));
    }

    #[test]
    fn matcher_agrees_with_brute_force(seed in any::<u64>(), w in 1usize..24, h in 1usize..24) {
        let cat = ClassCatalog::desk();
        let mut r = rng(seed);
        let gt = random_map(&mut r, w, h, &cat);
        let pred = perturb(&mut r, &gt, &cat);
        let m = match_segments(&pred, &gt, &cat).unwrap();
        let o = oracle_match(&pred, &gt, &cat);
        let tp: BTreeSet<_> = m.classes.values().flat_map(|c| c.tp.iter().map(|t| (t.pred, t.gt, t.intersection, t.union))).collect();
        let fp: BTreeSet<_> = m.classes.values().flat_map(|c| c.fp.iter().copied()).collect();
        let fn_: BTreeSet<_> = m.classes.values().flat_map(|c| c.fn_.iter().copied()).collect();
        prop_assert_eq!(tp, o.tp);
        prop_assert_eq!(fp, o.fp);
        prop_assert_eq!(fn_, o.fn_);
    }

    #[test]
    fn matches_are_one_to_one(seed in any::<u64>(), w in 1usize..24, h in 1usize..24) {
        let cat = ClassCatalog::desk();
        let mut r = rng(seed);
        let gt = random_map(&mut r, w, h, &cat);
        let pred = perturb(&mut r, &gt, &cat);
        let m = match_segments(&pred, &gt, &cat).unwrap();
        let mut ps = BTreeSet::new();
        let mut gs = BTreeSet::new();
        for t in m.classes.values().flat_map(|c| c.tp.iter()) {
            prop_assert!(ps.insert(t.pred));
            prop_assert!(gs.insert(t.gt));
            prop_assert!(t.intersection * 2 > t.union);
        }
    }

    #[test]
    fn peaks_match_window_oracle(seed in any::<u64>(), w in 1usize..30, h in 1usize..30,
                                 kernel in prop::sample::select(vec![1usize, 3, 5, 7]),
                                 thr in 0.0f32..0.6, top_k in 1usize..50) {
        let heat = random_heat(&mut rng(seed), w, h);
        let p = FusionParams { nms_kernel: kernel, center_threshold: thr, top_k, ..FusionParams::for_dims(w, h) };
        let got: Vec<_> = find_centers(&heat, w, h, &p).into_iter().map(|c| (c.y, c.x, c.score)).collect();
        prop_assert_eq!(got, oracle_centers(&heat, w, h, &p));
    }

    #[test]
    fn aggregation_ignores_order_and_sharding(seed in any::<u64>(), n in 1usize..8, split in 0usize..8) {
        let cat = ClassCatalog::desk();
        let mut r = rng(seed);
        let evals: Vec<_> = (0..n)
            .map(|i| {
                let (w, h) = (r.random_range(4..20), r.random_range(4..20));
                let gt = random_map(&mut r, w, h, &cat);
                let pred = perturb(&mut r, &gt, &cat);
                let scores: BTreeMap<_, _> = pred.segment_areas(cat.void_id()).keys().map(|&k| (k, r.random_range(0.0f32..1.0))).collect();
                evaluate_image(&pred, &scores, &gt, &cat, i as u64).unwrap()
            })
            .collect();
        let forward_order = aggregate(&evals, &cat).unwrap();
        let reversed = aggregate(evals.iter().rev(), &cat).unwrap();
        prop_assert_eq!(&forward_order, &reversed);

        let cut = split.min(n);
        let mut a = EvalAccumulator::new(&cat);
        let mut b = EvalAccumulator::new(&cat);
        evals[..cut].iter().for_each(|e| a.add(e).unwrap());
        evals[cut..].iter().for_each(|e| b.add(e).unwrap());
        b.merge(&a).unwrap();
        prop_assert_eq!(&b.finalize(&cat).unwrap(), &forward_order);
    }

    #[test]
    fn scores_ignore_pixel_permutation(seed in any::<u64>(), w in 1usize..20, h in 1usize..20) {
        let cat = ClassCatalog::desk();
        let mut r = rng(seed);
        let gt = random_map(&mut r, w, h, &cat);
        let pred = perturb(&mut r, &gt, &cat);
        let mut perm: Vec<usize> = (0..w * h).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let none = BTreeMap::new();
        let a = evaluate_image(&pred, &none, &gt, &cat, 0).unwrap();
        let b = evaluate_image(&pred.permuted(&perm), &none, &gt.permuted(&perm), &cat, 0).unwrap();
        let (ra, rb) = (aggregate([&a], &cat).unwrap(), aggregate([&b], &cat).unwrap());
        prop_assert_eq!(&ra.columns()[..13], &rb.columns()[..13]);
        prop_assert_eq!(ra.per_class, rb.per_class);
    }

    #[test]
    fn subset_selection_is_distinct_and_sized(n in 0usize..3000, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let idx = select_subset(n, f, seed).unwrap();
        prop_assert_eq!(idx.len(), subset_size(n, f));
        prop_assert!(idx.iter().all(|&i| i < n));
        prop_assert_eq!(idx.iter().collect::<BTreeSet<_>>().len(), idx.len());
        prop_assert_eq!(select_subset(n, f, seed).unwrap(), idx);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn losses_are_finite_and_non_negative(seed in any::<u64>(), scene in 0u64..50, hidden in 1usize..10) {
        let cat = ClassCatalog::desk();
        let graph = compose_scene(scene, &cat, &SceneConfig::default()).unwrap();
        let (img, gt) = render(&graph, &LightingSpec::day(), 32, 32).unwrap();
        let targets = make_targets(&gt, &cat, &TargetParams::for_dims(32, 32));
        let model = SegModel::init(hidden, cat.len(), 2, 4.0, &mut rng(seed));
        let heads = forward(&model, &featurize(&img, 2)).unwrap();
        let l = losses(&heads, &targets, &LossWeights::default(), 0.3).unwrap();
        for v in [l.sem, l.center, l.offset, l.total] {
            prop_assert!(v.is_finite() && v >= 0.0, "{:?}", l);
        }
        prop_assert!((l.total - (l.sem + 200.0 * l.center + 0.01 * l.offset)).abs() <= 1e-9 * l.total.max(1.0));
    }

    #[test]
    fn probabilities_sum_to_one(seed in any::<u64>(), hidden in 1usize..10) {
        let cat = ClassCatalog::desk();
        let graph = compose_scene(seed % 100, &cat, &SceneConfig::default()).unwrap();
        let (img, _) = render(&graph, &LightingSpec::night(), 32, 32).unwrap();
        let heads = forward(&SegModel::init(hidden, cat.len(), 2, 4.0, &mut rng(seed)), &featurize(&img, 2)).unwrap();
        for i in 0..32 * 32 {
            let s: f32 = heads.probs_at(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-4);
        }
    }
}
