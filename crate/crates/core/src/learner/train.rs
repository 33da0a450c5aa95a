use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{featurize, Features};
use super::losses::{loss_and_grad, LossBreakdown, LossWeights, MiningParams};
use super::model::{forward, SegModel};
use super::optim::{adam_step, AdamHyper, OptimState};
use super::schedule::{lr_at, Schedule};
use super::targets::{make_targets, TargetParams, Targets};
use crate::error::{Error, Result};
use crate::fusion::HeadOutputs;
use crate::panoptic::io::{read_image, read_panoptic};
use crate::panoptic::{ClassCatalog, DatasetIndex, ImageBuffer, LabelMap, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    /// Images per step.
    pub batch: usize,
    pub lr_base: f64,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub hidden: usize,
    pub radius: usize,
    pub offset_scale: f64,
    /// Center heatmap spread. Unset means 8 px at 2048×1024, rescaled.
    pub sigma: Option<f64>,
    pub mining: MiningParams,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch: 1,
            lr_base: 2e-2,
            schedule: Schedule::Poly { power: 0.9 },
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 7,
            hidden: 32,
            radius: 2,
            offset_scale: 10.0,
            sigma: Some(2.0),
            mining: MiningParams::default(),
            loss_weights: LossWeights {
                center: 20.0,
                ..LossWeights::default()
            },
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Format(format!("train config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The full-resolution protocol: 90000 iterations at base lr 5e-5, the
    /// resolution-scaled center spread and center weight 200.
    pub fn full_protocol() -> Self {
        TrainConfig {
            iterations: 90_000,
            lr_base: 5e-5,
            sigma: None,
            loss_weights: LossWeights::default(),
            ..TrainConfig::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let w = &self.loss_weights;
        let m = &self.mining;
        if self.batch == 0 || self.hidden == 0 {
            return Err(Error::Validation("batch and hidden must be positive".into()));
        }
        let nonneg = [w.sem, w.center, w.offset, m.small_weight, m.base_weight, self.lr_base];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("loss weights and learning rate must be finite and non-negative".into()));
        }
        if !(m.topk_fraction > 0.0 && m.topk_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "topk_fraction must be in (0, 1], got {}",
                m.topk_fraction
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Validation(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            lr_base: self.lr_base,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn target_params(&self, w: usize, h: usize) -> TargetParams {
        let scaled = TargetParams::for_dims(w, h);
        TargetParams {
            sigma: self.sigma.unwrap_or(scaled.sigma),
            small_area_threshold: self.mining.small_area_threshold.unwrap_or(scaled.small_area_threshold),
            small_weight: self.mining.small_weight,
            base_weight: self.mining.base_weight,
        }
    }

    pub fn init_model(&self, catalog: &ClassCatalog) -> SegModel {
        let mut rng = crate::rng::seeded(crate::rng::derive(self.seed, 1));
        SegModel::init(self.hidden, catalog.len(), self.radius, self.offset_scale, &mut rng)
    }
}

/// A featurized image with its targets.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: Features,
    pub targets: Targets,
}

impl TrainSample {
    pub fn new(img: &ImageBuffer, gt: &LabelMap, catalog: &ClassCatalog, cfg: &TrainConfig) -> Result<Self> {
        if img.width() != gt.width() || img.height() != gt.height() {
            return Err(Error::Input(format!(
                "image is {}x{} but labels are {}x{}",
                img.width(),
                img.height(),
                gt.width(),
                gt.height()
            )));
        }
        Ok(TrainSample {
            features: featurize(img, cfg.radius),
            targets: make_targets(gt, catalog, &cfg.target_params(img.width(), img.height())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: u64,
    pub lr: f64,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SegModel,
    pub state: OptimState,
    pub trace: Vec<LossRecord>,
}

/// Reads the labelled training entries of `index`. Entries of other splits
/// are skipped when any entry is marked as training data.
pub fn load_samples(index: &DatasetIndex, catalog: &ClassCatalog, cfg: &TrainConfig) -> Result<Vec<TrainSample>> {
    let has_train = index.entries.iter().any(|e| e.split == Split::Train);
    index
        .entries
        .par_iter()
        .filter(|e| !has_train || e.split == Split::Train)
        .map(|e| {
            let label = e
                .label
                .as_ref()
                .ok_or_else(|| Error::Input(format!("training entry {} has no labels", e.image.display())))?;
            let img = read_image(&e.image)?;
            let (gt, _) = read_panoptic(label, catalog)?;
            TrainSample::new(&img, &gt, catalog, cfg)
        })
        .collect()
}

/// Runs `cfg.iterations` steps starting from `model` and `state`. The
/// schedule restarts at zero for each call; shuffles depend on the seed and
/// the optimizer step counter.
pub fn train_on_samples(
    model: &mut SegModel,
    state: &mut OptimState,
    cfg: &TrainConfig,
    samples: &[TrainSample],
) -> Result<Vec<LossRecord>> {
    cfg.check()?;
    if samples.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    let n = samples.len();
    let base = state.step;
    let mut order: Vec<usize> = Vec::new();
    let mut epoch = u64::MAX;
    let mut trace = Vec::with_capacity(cfg.iterations as usize);
    for it in 0..cfg.iterations {
        let lr = lr_at(cfg.lr_base, cfg.schedule, it, cfg.iterations);
        let mut grads = model.params.zeros_like();
        let mut sum = LossBreakdown::default();
        for j in 0..cfg.batch {
            let pos = it * cfg.batch as u64 + j as u64;
            let e = pos / n as u64;
            if e != epoch {
                epoch = e;
                order = (0..n).collect();
                let tag = crate::rng::derive(base, e).wrapping_add(2);
                order.shuffle(&mut crate::rng::seeded(crate::rng::derive(cfg.seed, tag)));
            }
            let s = &samples[order[(pos % n as u64) as usize]];
            let (l, g) = loss_and_grad(model, &s.features, &s.targets, &cfg.loss_weights, cfg.mining.topk_fraction)?;
            grads.add_assign(&g);
            sum.sem += l.sem;
            sum.center += l.center;
            sum.offset += l.offset;
            sum.total += l.total;
        }
        let inv = 1.0 / cfg.batch as f64;
        grads.scale(inv);
        adam_step(&mut model.params, &grads, state, lr)?;
        trace.push(LossRecord {
            iteration: it,
            lr,
            loss: LossBreakdown {
                sem: sum.sem * inv,
                center: sum.center * inv,
                offset: sum.offset * inv,
                total: sum.total * inv,
            },
        });
    }
    Ok(trace)
}

/// Trains from scratch, or continues from `resume`.
pub fn train_segmenter(
    cfg: &TrainConfig,
    train: &DatasetIndex,
    catalog: &ClassCatalog,
    resume: Option<(SegModel, OptimState)>,
) -> Result<TrainOutcome> {
    cfg.check()?;
    let samples = load_samples(train, catalog, cfg)?;
    if samples.is_empty() {
        return Err(Error::Input("training set has no entries".into()));
    }
    let (mut model, mut state) = match resume {
        Some((m, mut s)) => {
            if m.n_classes != catalog.len() {
                return Err(Error::Input(format!(
                    "checkpoint has {} classes, catalog has {}",
                    m.n_classes,
                    catalog.len()
                )));
            }
            s.hyper = cfg.adam();
            (m, s)
        }
        None => {
            let m = cfg.init_model(catalog);
            let s = OptimState::new(&m.params, cfg.adam());
            (m, s)
        }
    };
    let trace = train_on_samples(&mut model, &mut state, cfg, &samples)?;
    Ok(TrainOutcome { model, state, trace })
}

/// Head outputs of `model` on one image.
pub fn predict(model: &SegModel, img: &ImageBuffer) -> Result<HeadOutputs> {
    forward(model, &featurize(img, model.radius))
}
