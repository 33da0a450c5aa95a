use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::panoptic::{ClassCatalog, LabelMap};

const REF_PIXELS: f64 = 2048.0 * 1024.0;

/// Parameters of the supervision targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    /// Gaussian spread of the center heatmap, pixels.
    pub sigma: f64,
    /// Thing instances smaller than this get `small_weight`.
    pub small_area_threshold: f64,
    pub small_weight: f64,
    pub base_weight: f64,
}

impl TargetParams {
    /// σ = 8 and the 4096-pixel rule at 2048×1024, rescaled to `w×h`.
    pub fn for_dims(w: usize, h: usize) -> Self {
        let ratio = (w * h) as f64 / REF_PIXELS;
        TargetParams {
            sigma: 8.0 * ratio.sqrt(),
            small_area_threshold: 4096.0 * ratio,
            small_weight: 3.0,
            base_weight: 1.0,
        }
    }
}

/// Dense per-pixel training targets for one label map.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub width: usize,
    pub height: usize,
    /// Class index, `None` on void.
    pub labels: Vec<Option<usize>>,
    pub center: Vec<f64>,
    /// `(Δy, Δx)` to the instance centroid; zero off thing pixels.
    pub offset: Vec<f64>,
    pub thing: Vec<bool>,
    pub weight: Vec<f64>,
}

impl Targets {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn make_targets(gt: &LabelMap, catalog: &ClassCatalog, params: &TargetParams) -> Targets {
    let (w, h) = (gt.width(), gt.height());
    let n = w * h;
    let mut sums: BTreeMap<_, (f64, f64, u64)> = BTreeMap::new();
    for i in 0..n {
        let k = gt.key(i);
        if catalog.is_thing(k.0) && k.1 > 0 {
            let e = sums.entry(k).or_insert((0.0, 0.0, 0));
            e.0 += (i / w) as f64;
            e.1 += (i % w) as f64;
            e.2 += 1;
        }
    }
    let centroids: BTreeMap<_, (f64, f64, u64)> =
        sums.into_iter().map(|(k, (sy, sx, a))| (k, (sy / a as f64, sx / a as f64, a))).collect();

    let mut center = vec![0.0f64; n];
    let two_s2 = 2.0 * params.sigma * params.sigma;
    for &(cy, cx, _) in centroids.values() {
        for (i, c) in center.iter_mut().enumerate() {
            let d2 = ((i / w) as f64 - cy).powi(2) + ((i % w) as f64 - cx).powi(2);
            let g = (-d2 / two_s2).exp();
            if g > *c {
                *c = g;
            }
        }
    }

    let mut labels = vec![None; n];
    let mut offset = vec![0.0; 2 * n];
    let mut thing = vec![false; n];
    let mut weight = vec![params.base_weight; n];
    for i in 0..n {
        let k = gt.key(i);
        if catalog.is_eval(k.0) {
            labels[i] = Some(k.0 as usize);
        }
        if let Some(&(cy, cx, area)) = centroids.get(&k) {
            thing[i] = true;
            offset[2 * i] = cy - (i / w) as f64;
            offset[2 * i + 1] = cx - (i % w) as f64;
            if (area as f64) < params.small_area_threshold {
                weight[i] = params.small_weight;
            }
        }
    }
    Targets {
        width: w,
        height: h,
        labels,
        center,
        offset,
        thing,
        weight,
    }
}
