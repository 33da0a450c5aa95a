use serde::{Deserialize, Serialize};

use super::features::{Features, FEATURE_DIM};
use super::model::*;
use super::optim::ParamSet;
use super::targets::Targets;
use crate::error::{Error, Result};
use crate::fusion::HeadOutputs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub sem: f64,
    pub center: f64,
    pub offset: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            sem: 1.0,
            center: 200.0,
            offset: 0.01,
        }
    }
}

/// Hard pixel mining for the semantic loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningParams {
    /// Area below which a thing instance counts as small. Unset means the
    /// 4096-pixel rule rescaled to the image size.
    pub small_area_threshold: Option<f64>,
    pub small_weight: f64,
    pub base_weight: f64,
    pub topk_fraction: f64,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            small_area_threshold: None,
            small_weight: 3.0,
            base_weight: 1.0,
            topk_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub sem: f64,
    pub center: f64,
    pub offset: f64,
    pub total: f64,
}

struct HeadGrads<'a> {
    logits: &'a mut [f64],
    center: &'a mut [f64],
    offset: &'a mut [f64],
}

/// Core loss evaluation on f64 head values. Gradients, when requested, are
/// with respect to the logits, the squashed center and the scaled offsets.
fn evaluate(
    n_classes: usize,
    probs: &[f64],
    log_probs: &[f64],
    center: &[f64],
    offset: &[f64],
    t: &Targets,
    weights: &LossWeights,
    topk_fraction: f64,
    grads: Option<HeadGrads<'_>>,
) -> LossBreakdown {
    let c = n_classes;
    let mut weighted: Vec<(f64, usize)> = t
        .labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|k| (-log_probs[i * c + k] * t.weight[i], i)))
        .collect();
    let n_valid = weighted.len();
    let n_thing = t.thing.iter().filter(|&&b| b).count();

    let k = if n_valid == 0 {
        0
    } else {
        ((topk_fraction * n_valid as f64).ceil() as usize).clamp(1, n_valid)
    };
    if k < n_valid {
        weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        weighted.truncate(k);
    }
    let sem = if k == 0 {
        0.0
    } else {
        weighted.iter().map(|w| w.0).sum::<f64>() / k as f64
    };

    let mut center_loss = 0.0;
    let mut offset_loss = 0.0;
    for i in 0..t.len() {
        if t.labels[i].is_some() {
            center_loss += (center[i] - t.center[i]).powi(2);
        }
        if t.thing[i] {
            offset_loss += (offset[2 * i] - t.offset[2 * i]).abs() + (offset[2 * i + 1] - t.offset[2 * i + 1]).abs();
        }
    }
    if n_valid > 0 {
        center_loss /= n_valid as f64;
    }
    if n_thing > 0 {
        offset_loss /= n_thing as f64;
    }

    if let Some(g) = grads {
        for &(_, i) in &weighted {
            let label = t.labels[i].expect("selected pixels are labelled");
            let s = weights.sem * t.weight[i] / k as f64;
            for j in 0..c {
                let onehot = if j == label { 1.0 } else { 0.0 };
                g.logits[i * c + j] += s * (probs[i * c + j] - onehot);
            }
        }
        for i in 0..t.len() {
            if t.labels[i].is_some() {
                g.center[i] += weights.center * 2.0 * (center[i] - t.center[i]) / n_valid as f64;
            }
            if t.thing[i] {
                for d in 0..2 {
                    let diff = offset[2 * i + d] - t.offset[2 * i + d];
                    g.offset[2 * i + d] += weights.offset * sign(diff) / n_thing as f64;
                }
            }
        }
    }
    LossBreakdown {
        sem,
        center: center_loss,
        offset: offset_loss,
        total: weights.sem * sem + weights.center * center_loss + weights.offset * offset_loss,
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Losses of precomputed head outputs against `targets`.
pub fn losses(h: &HeadOutputs, targets: &Targets, weights: &LossWeights, topk_fraction: f64) -> Result<LossBreakdown> {
    if h.width() != targets.width || h.height() != targets.height {
        return Err(Error::Input("head outputs and targets differ in size".into()));
    }
    if let Some(k) = targets.labels.iter().flatten().find(|&&k| k >= h.n_classes()) {
        return Err(Error::Input(format!("target class {k} outside the semantic head")));
    }
    let probs: Vec<f64> = h.sem_probs().iter().map(|&p| p as f64).collect();
    let log_probs: Vec<f64> = probs.iter().map(|&p| p.max(f64::MIN_POSITIVE).ln()).collect();
    let center: Vec<f64> = h.center().iter().map(|&v| v as f64).collect();
    let offset: Vec<f64> = h.offset().iter().map(|&v| v as f64).collect();
    Ok(evaluate(
        h.n_classes(),
        &probs,
        &log_probs,
        &center,
        &offset,
        targets,
        weights,
        topk_fraction,
        None,
    ))
}

/// Losses of `model` on one sample and the gradient of the total loss with
/// respect to every parameter.
pub fn loss_and_grad(
    model: &SegModel,
    features: &Features,
    targets: &Targets,
    weights: &LossWeights,
    topk_fraction: f64,
) -> Result<(LossBreakdown, ParamSet)> {
    if features.len() != targets.len() {
        return Err(Error::Input("features and targets differ in size".into()));
    }
    if let Some(k) = targets.labels.iter().flatten().find(|&&k| k >= model.n_classes) {
        return Err(Error::Input(format!("target class {k} outside the semantic head")));
    }
    let fp = ForwardPass::run(model, features)?;
    let n = features.len();
    let (hd, c) = (model.hidden, model.n_classes);
    let mut g_logits = vec![0.0; n * c];
    let mut g_center = vec![0.0; n];
    let mut g_offset = vec![0.0; 2 * n];
    let loss = evaluate(
        c,
        &fp.probs,
        &fp.log_probs,
        &fp.center,
        &fp.offset,
        targets,
        weights,
        topk_fraction,
        Some(HeadGrads {
            logits: &mut g_logits,
            center: &mut g_center,
            offset: &mut g_offset,
        }),
    );

    let mut grads = model.params.zeros_like();
    let ws = model.block(SEM_W);
    let wc = model.block(CENTER_W);
    let wo = model.block(OFFSET_W);
    let mut gh = vec![0.0; hd];
    for i in 0..n {
        let h = &fp.hidden[i * hd..(i + 1) * hd];
        let gz = &g_logits[i * c..(i + 1) * c];
        let cv = fp.center[i];
        let ga = g_center[i] * cv * (1.0 - cv);
        let go = [g_offset[2 * i] * model.offset_scale, g_offset[2 * i + 1] * model.offset_scale];
        if ga == 0.0 && go == [0.0, 0.0] && gz.iter().all(|&v| v == 0.0) {
            continue;
        }
        gh.iter_mut().for_each(|v| *v = 0.0);
        {
            let b = &mut grads.blocks[SEM_W].data;
            for k in 0..c {
                if gz[k] == 0.0 {
                    continue;
                }
                for j in 0..hd {
                    b[k * hd + j] += gz[k] * h[j];
                    gh[j] += ws[k * hd + j] * gz[k];
                }
            }
        }
        for k in 0..c {
            grads.blocks[SEM_B].data[k] += gz[k];
        }
        for j in 0..hd {
            grads.blocks[CENTER_W].data[j] += ga * h[j];
            gh[j] += wc[j] * ga;
        }
        grads.blocks[CENTER_B].data[0] += ga;
        for d in 0..2 {
            for j in 0..hd {
                grads.blocks[OFFSET_W].data[d * hd + j] += go[d] * h[j];
                gh[j] += wo[d * hd + j] * go[d];
            }
            grads.blocks[OFFSET_B].data[d] += go[d];
        }
        let x = features.row(i);
        for j in 0..hd {
            if h[j] <= 0.0 {
                continue;
            }
            let g = gh[j];
            let row = &mut grads.blocks[HIDDEN_W].data[j * FEATURE_DIM..(j + 1) * FEATURE_DIM];
            for (r, v) in row.iter_mut().zip(x) {
                *r += g * v;
            }
            grads.blocks[HIDDEN_B].data[j] += g;
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::HeadOutputs;
    use crate::learner::{featurize, make_targets, TargetParams};
    use crate::panoptic::{ClassCatalog, ImageBuffer, LabelMap};
    use rand::Rng;

    fn scene() -> (ImageBuffer, LabelMap, ClassCatalog) {
        let cat = ClassCatalog::desk();
        let mut gt = LabelMap::void(8, 6, cat.void_id());
        for y in 0..6 {
            for x in 0..8 {
                let (c, k) = match (x, y) {
                    (0, 0) => (cat.void_id(), 0),
                    (_, 0..=1) => (6, 0),
                    (1..=2, 2..=4) => (8, 1),
                    (5, 3..=5) => (7, 1),
                    _ => (0, 0),
                };
                gt.set(x, y, c, k);
            }
        }
        let mut rng = crate::rng::seeded(11);
        let img = ImageBuffer::from_fn(8, 6, |_, _| [rng.random(), rng.random(), rng.random()]);
        (img, gt, cat)
    }

    fn params() -> TargetParams {
        TargetParams {
            sigma: 1.5,
            small_area_threshold: 4.0,
            small_weight: 3.0,
            base_weight: 1.0,
        }
    }

    fn perfect_heads(t: &Targets, n_classes: usize) -> HeadOutputs {
        let n = t.len();
        let mut sem = vec![0.0f32; n * n_classes];
        for i in 0..n {
            sem[i * n_classes + t.labels[i].unwrap_or(0)] = 1.0;
        }
        HeadOutputs::new(
            t.width,
            t.height,
            n_classes,
            sem,
            t.center.iter().map(|&v| v as f32).collect(),
            t.offset.iter().map(|&v| v as f32).collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_heads_have_zero_loss() {
        let (_, gt, cat) = scene();
        let t = make_targets(&gt, &cat, &TargetParams { sigma: 1.0, ..params() });
        // Targets that are exactly representable in f32.
        let t = Targets {
            center: t.center.iter().map(|&v| v as f32 as f64).collect(),
            offset: t.offset.iter().map(|&v| v as f32 as f64).collect(),
            ..t
        };
        let l = losses(&perfect_heads(&t, cat.len()), &t, &LossWeights::default(), 0.15).unwrap();
        assert!(l.sem <= 1e-6);
        assert_eq!((l.center, l.offset), (0.0, 0.0));
    }

    #[test]
    fn uniform_probs_give_ln_n_per_pixel() {
        let (_, gt, cat) = scene();
        let t = make_targets(&gt, &cat, &TargetParams { small_weight: 1.0, ..params() });
        let n = t.len();
        let c = cat.len();
        let h = HeadOutputs::new(8, 6, c, vec![1.0 / c as f32; n * c], vec![0.0; n], vec![0.0; 2 * n]).unwrap();
        let l = losses(&h, &t, &LossWeights::default(), 1.0).unwrap();
        assert!((l.sem - (c as f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn all_stuff_has_zero_offset_loss() {
        let cat = ClassCatalog::desk();
        let mut gt = LabelMap::void(4, 4, cat.void_id());
        for i in 0..16 {
            gt.set(i % 4, i / 4, (i % 3) as u8, 0);
        }
        let t = make_targets(&gt, &cat, &params());
        let h = HeadOutputs::new(4, 4, cat.len(), vec![1.0 / 9.0; 16 * 9], vec![0.3; 16], vec![5.0; 32]);
        let l = losses(&h.unwrap(), &t, &LossWeights::default(), 0.15).unwrap();
        assert_eq!(l.offset, 0.0);
        assert!(l.center > 0.0);
    }

    #[test]
    fn full_fraction_equals_weighted_mean_ce() {
        let (img, gt, cat) = scene();
        let t = make_targets(&gt, &cat, &params());
        let model = SegModel::init(6, cat.len(), 2, 4.0, &mut crate::rng::seeded(5));
        let f = featurize(&img, 2);
        let fp = ForwardPass::run(&model, &f).unwrap();
        let (l, _) = loss_and_grad(&model, &f, &t, &LossWeights::default(), 1.0).unwrap();
        let mut sum = 0.0;
        let mut count = 0;
        for i in 0..t.len() {
            if let Some(k) = t.labels[i] {
                sum += -fp.probs[i * cat.len() + k].ln() * t.weight[i];
                count += 1;
            }
        }
        assert!((l.sem - sum / count as f64).abs() < 1e-12);
    }

    #[test]
    fn losses_are_non_negative() {
        let (img, gt, cat) = scene();
        let t = make_targets(&gt, &cat, &params());
        for seed in 0..5 {
            let model = SegModel::init(6, cat.len(), 2, 4.0, &mut crate::rng::seeded(seed));
            let (l, _) = loss_and_grad(&model, &featurize(&img, 2), &t, &LossWeights::default(), 0.3).unwrap();
            assert!(l.sem >= 0.0 && l.center >= 0.0 && l.offset >= 0.0);
        }
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (img, gt, cat) = scene();
        let t = make_targets(&gt, &cat, &params());
        let f = featurize(&img, 2);
        let weights = LossWeights {
            sem: 1.0,
            center: 3.0,
            offset: 0.5,
        };
        let mut model = SegModel::init(6, cat.len(), 2, 4.0, &mut crate::rng::seeded(21));
        // Non-zero biases so every head contributes.
        let mut rng = crate::rng::seeded(22);
        for b in [HIDDEN_B, SEM_B, CENTER_B, OFFSET_B] {
            for v in &mut model.params.blocks[b].data {
                *v = rng.random_range(-0.3..0.3);
            }
        }
        let (_, grads) = loss_and_grad(&model, &f, &t, &weights, 0.4).unwrap();
        let total = |m: &SegModel| loss_and_grad(m, &f, &t, &weights, 0.4).unwrap().0.total;
        let step = 1e-5;
        // Every block, then random positions.
        let mut picks: Vec<usize> = Vec::new();
        let mut start = 0;
        for b in &model.params.blocks {
            picks.push(start);
            start += b.data.len();
        }
        while picks.len() < 8 + 20 {
            picks.push(rng.random_range(0..model.params.len()));
        }
        for k in picks {
            let v = model.params.get_flat(k);
            let mut plus = model.clone();
            plus.params.set_flat(k, v + step);
            let mut minus = model.clone();
            minus.params.set_flat(k, v - step);
            let numeric = (total(&plus) - total(&minus)) / (2.0 * step);
            let analytic = grads.get_flat(k);
            let scale = numeric.abs().max(analytic.abs()).max(1e-6);
            assert!(
                (numeric - analytic).abs() / scale < 1e-4,
                "param {k}: numeric {numeric} analytic {analytic}"
            );
        }
    }
}
