use crate::error::{Error, Result};
use crate::panoptic::{ClassCatalog, LabelMap};

/// Outputs of the three prediction heads for one image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    width: usize,
    height: usize,
    n_classes: usize,
    sem_probs: Vec<f32>,
    center: Vec<f32>,
    offset: Vec<f32>,
}

impl HeadOutputs {
    /// `sem_probs` is `H·W·C` (class fastest), `center` is `H·W`, `offset`
    /// is `H·W·2` holding `(Δy, Δx)` in pixels.
    pub fn new(
        width: usize,
        height: usize,
        n_classes: usize,
        sem_probs: Vec<f32>,
        center: Vec<f32>,
        offset: Vec<f32>,
    ) -> Result<Self> {
        let n = width * height;
        if sem_probs.len() != n * n_classes || center.len() != n || offset.len() != 2 * n {
            return Err(Error::Input(format!(
                "head shapes disagree for {width}x{height}x{n_classes}: sem={} center={} offset={}",
                sem_probs.len(),
                center.len(),
                offset.len()
            )));
        }
        if n_classes == 0 {
            return Err(Error::Input("heads need at least one class".into()));
        }
        let all = sem_probs.iter().chain(&center).chain(&offset);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("head outputs contain non-finite values".into()));
        }
        for (i, row) in sem_probs.chunks_exact(n_classes).enumerate() {
            let s: f64 = row.iter().map(|&p| p as f64).sum();
            if (s - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::Validation(format!(
                    "semantic probabilities at pixel ({}, {}) sum to {s}",
                    i % width,
                    i / width
                )));
            }
        }
        Ok(HeadOutputs {
            width,
            height,
            n_classes,
            sem_probs,
            center,
            offset,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn sem_probs(&self) -> &[f32] {
        &self.sem_probs
    }

    pub fn center(&self) -> &[f32] {
        &self.center
    }

    pub fn offset(&self) -> &[f32] {
        &self.offset
    }

    pub fn probs_at(&self, i: usize) -> &[f32] {
        &self.sem_probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn set_center(&mut self, i: usize, v: f32) {
        self.center[i] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionParams {
    pub nms_kernel: usize,
    pub center_threshold: f32,
    pub top_k: usize,
    pub stuff_area_min: u64,
}

impl Default for FusionParams {
    /// Full-resolution values: kernel 7, threshold 0.1, top-k 200 and a
    /// 4096-pixel stuff area at 2048×1024.
    fn default() -> Self {
        FusionParams {
            nms_kernel: 7,
            center_threshold: 0.1,
            top_k: 200,
            stuff_area_min: 4096,
        }
    }
}

impl FusionParams {
    /// Defaults with the stuff area scaled by pixel count relative to
    /// 2048×1024.
    pub fn for_dims(width: usize, height: usize) -> Self {
        FusionParams {
            stuff_area_min: (4096.0 * (width * height) as f64 / (2048.0 * 1024.0)).round() as u64,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.nms_kernel.is_multiple_of(2) || self.nms_kernel == 0 {
            return Err(Error::Validation(format!("nms kernel {} must be odd", self.nms_kernel)));
        }
        if !(0.0..=1.0).contains(&self.center_threshold) {
            return Err(Error::Validation("center threshold must lie in [0, 1]".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Validation("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Heads that a perfect network would produce for `gt`: one-hot semantics
/// (uniform on void), a unit peak on the instance pixel closest to each
/// instance centroid, and offsets pointing exactly at that pixel.
pub fn oracle_heads(gt: &LabelMap, catalog: &ClassCatalog) -> HeadOutputs {
    let (w, h, c) = (gt.width(), gt.height(), catalog.len());
    let n = w * h;
    let mut sem = vec![0.0f32; n * c];
    for i in 0..n {
        let s = gt.sem()[i];
        if catalog.contains(s) {
            sem[i * c + s as usize] = 1.0;
        } else {
            for p in &mut sem[i * c..(i + 1) * c] {
                *p = 1.0 / c as f32;
            }
        }
    }
    let seeds = instance_seed_pixels(gt, catalog);
    let mut center = vec![0.0f32; n];
    let mut offset = vec![0.0f32; 2 * n];
    for &seed in seeds.values() {
        center[seed] = 1.0;
    }
    for i in 0..n {
        if let Some(&seed) = seeds.get(&gt.key(i)) {
            offset[2 * i] = (seed / w) as f32 - (i / w) as f32;
            offset[2 * i + 1] = (seed % w) as f32 - (i % w) as f32;
        }
    }
    // Rows may miss 1.0 by an ulp after the uniform fill; renormalise.
    for row in sem.chunks_exact_mut(c) {
        let s: f32 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= s;
        }
    }
    HeadOutputs::new(w, h, c, sem, center, offset).expect("oracle heads are well formed")
}

/// For every thing instance, the pixel nearest its centroid (first in scan
/// order on ties).
pub(crate) fn instance_seed_pixels(
    gt: &LabelMap,
    catalog: &ClassCatalog,
) -> std::collections::BTreeMap<crate::panoptic::SegmentKey, usize> {
    use std::collections::BTreeMap;
    let w = gt.width();
    let mut sums: BTreeMap<_, (f64, f64, f64)> = BTreeMap::new();
    for i in 0..gt.len() {
        let k = gt.key(i);
        if catalog.is_thing(k.0) && k.1 > 0 {
            let e = sums.entry(k).or_insert((0.0, 0.0, 0.0));
            e.0 += (i / w) as f64;
            e.1 += (i % w) as f64;
            e.2 += 1.0;
        }
    }
    let centroids: BTreeMap<_, (f64, f64)> = sums.iter().map(|(k, s)| (*k, (s.0 / s.2, s.1 / s.2))).collect();
    let mut best: BTreeMap<_, (f64, usize)> = BTreeMap::new();
    for i in 0..gt.len() {
        let k = gt.key(i);
        if let Some(&(cy, cx)) = centroids.get(&k) {
            let d = ((i / w) as f64 - cy).powi(2) + ((i % w) as f64 - cx).powi(2);
            let e = best.entry(k).or_insert((f64::INFINITY, i));
            if d < e.0 {
                *e = (d, i);
            }
        }
    }
    best.into_iter().map(|(k, (_, i))| (k, i)).collect()
}
