use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::translator::*;
use crate::error::{Error, Result};
use crate::learner::{adam_step, lr_at, AdamHyper, OptimState, ParamSet, Schedule};
use crate::panoptic::io::read_image;
use crate::panoptic::{DatasetIndex, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GanLoss {
    LeastSquares,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub epochs: u64,
    pub lr_base: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Side of the square training crops.
    pub crop: usize,
    pub batch: usize,
    pub loss: GanLoss,
    pub lambda_cyc: f64,
    /// Identity-mapping term weight, relative to `lambda_cyc`. Zero disables it.
    pub identity_weight: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            epochs: 200,
            lr_base: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            crop: 64,
            batch: 1,
            loss: GanLoss::LeastSquares,
            lambda_cyc: 10.0,
            identity_weight: 0.0,
            seed: 3,
        }
    }
}

impl GanConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GanConfig = toml::from_str(text).map_err(|e| Error::Format(format!("translator config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Settings that converge in a few dozen epochs on small synthetic sets.
    pub fn desk() -> Self {
        GanConfig {
            epochs: 60,
            lr_base: 2e-2,
            ..GanConfig::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.crop == 0 || self.batch == 0 {
            return Err(Error::Validation("crop and batch must be positive".into()));
        }
        let vals = [self.lr_base, self.lambda_cyc, self.identity_weight];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("learning rate and loss weights must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Validation("betas must be in [0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamHyper {
        AdamHyper {
            lr_base: self.lr_base,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
        }
    }
}

/// Generator-side terms, and the two discriminator objectives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GanLosses {
    pub adv_g: f64,
    pub adv_f: f64,
    pub cyc: f64,
    pub idt: f64,
    /// `adv_g + adv_f + λ·cyc (+ λ·w·idt)`.
    pub total: f64,
    pub d_day: f64,
    pub d_night: f64,
}

impl GanLosses {
    fn add(&mut self, o: &GanLosses) {
        self.adv_g += o.adv_g;
        self.adv_f += o.adv_f;
        self.cyc += o.cyc;
        self.idt += o.idt;
        self.total += o.total;
        self.d_day += o.d_day;
        self.d_night += o.d_night;
    }

    fn scale(&mut self, s: f64) {
        for v in [
            &mut self.adv_g,
            &mut self.adv_f,
            &mut self.cyc,
            &mut self.idt,
            &mut self.total,
            &mut self.d_day,
            &mut self.d_night,
        ] {
            *v *= s;
        }
    }
}

/// Gradients of the generator total and of `d_day + d_night`.
#[derive(Debug, Clone, PartialEq)]
pub struct GanGrads {
    pub generators: ParamSet,
    pub discriminators: ParamSet,
}

fn adv(kind: GanLoss, d: f64, target: f64) -> (f64, f64) {
    match kind {
        GanLoss::LeastSquares => ((d - target).powi(2), 2.0 * (d - target)),
        GanLoss::Logistic => {
            let d = d.clamp(1e-12, 1.0 - 1e-12);
            if target > 0.5 {
                (-d.ln(), -1.0 / d)
            } else {
                (-(1.0 - d).ln(), 1.0 / (1.0 - d))
            }
        }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

fn l1_grad(a: &[f64], b: &[f64], weight: f64) -> Vec<f64> {
    let s = weight / a.len().max(1) as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x > y {
                s
            } else if x < y {
                -s
            } else {
                0.0
            }
        })
        .collect()
}

fn apply(p: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    gen_forward(p, v, &mut out);
    out
}

/// Losses for one day image `x` and one night image `y` (interleaved RGB),
/// with gradients when `grads` is set.
pub fn gan_step(pair: &TranslatorPair, x: &[f64], y: &[f64], cfg: &GanConfig, grads: bool) -> (GanLosses, Option<GanGrads>) {
    let (g, f, dd, dn) = (pair.g(), pair.f(), pair.d_day(), pair.d_night());
    let lam = cfg.lambda_cyc;
    let lam_idt = cfg.lambda_cyc * cfg.identity_weight;
    let fy = apply(g, x);
    let fx = apply(f, y);
    let rx = apply(f, &fy);
    let ry = apply(g, &fx);
    let (phi_fy, phi_fx) = (disc_features(&fy), disc_features(&fx));
    let (phi_x, phi_y) = (disc_features(x), disc_features(y));
    let (s_fy, s_fx) = (disc_score(dn, &phi_fy), disc_score(dd, &phi_fx));
    let (s_x, s_y) = (disc_score(dd, &phi_x), disc_score(dn, &phi_y));

    let (adv_g, d_adv_g) = adv(cfg.loss, s_fy, 1.0);
    let (adv_f, d_adv_f) = adv(cfg.loss, s_fx, 1.0);
    let cyc = l1(&rx, x) + l1(&ry, y);
    let (iy, ix) = if lam_idt > 0.0 { (apply(g, y), apply(f, x)) } else { (Vec::new(), Vec::new()) };
    let idt = if lam_idt > 0.0 { l1(&iy, y) + l1(&ix, x) } else { 0.0 };
    let (dn_real, d_dn_real) = adv(cfg.loss, s_y, 1.0);
    let (dn_fake, d_dn_fake) = adv(cfg.loss, s_fy, 0.0);
    let (dd_real, d_dd_real) = adv(cfg.loss, s_x, 1.0);
    let (dd_fake, d_dd_fake) = adv(cfg.loss, s_fx, 0.0);
    let losses = GanLosses {
        adv_g,
        adv_f,
        cyc,
        idt,
        total: adv_g + adv_f + lam * cyc + lam_idt * idt,
        d_day: 0.5 * (dd_real + dd_fake),
        d_night: 0.5 * (dn_real + dn_fake),
    };
    if !grads {
        return (losses, None);
    }

    let mut gen = pair.generators.zeros_like();
    let mut disc = pair.discriminators.zeros_like();
    {
        let (gg, gf) = gen.blocks.split_at_mut(1);
        let (gg, gf) = (&mut gg[0].data, &mut gf[0].data);

        let mut up_fy = vec![0.0; fy.len()];
        disc_backward(dn, &fy, &phi_fy, d_adv_g, None, Some(&mut up_fy));
        gen_backward(f, &fy, &l1_grad(&rx, x, lam), gf, Some(&mut up_fy));
        gen_backward(g, x, &up_fy, gg, None);

        let mut up_fx = vec![0.0; fx.len()];
        disc_backward(dd, &fx, &phi_fx, d_adv_f, None, Some(&mut up_fx));
        gen_backward(g, &fx, &l1_grad(&ry, y, lam), gg, Some(&mut up_fx));
        gen_backward(f, y, &up_fx, gf, None);

        if lam_idt > 0.0 {
            gen_backward(g, y, &l1_grad(&iy, y, lam_idt), gg, None);
            gen_backward(f, x, &l1_grad(&ix, x, lam_idt), gf, None);
        }
    }
    {
        let (gd, gn) = disc.blocks.split_at_mut(1);
        let (gd, gn) = (&mut gd[0].data, &mut gn[0].data);
        disc_backward(dn, y, &phi_y, 0.5 * d_dn_real, Some(gn), None);
        disc_backward(dn, &fy, &phi_fy, 0.5 * d_dn_fake, Some(gn), None);
        disc_backward(dd, x, &phi_x, 0.5 * d_dd_real, Some(gd), None);
        disc_backward(dd, &fx, &phi_fx, 0.5 * d_dd_fake, Some(gd), None);
    }
    (
        losses,
        Some(GanGrads {
            generators: gen,
            discriminators: disc,
        }),
    )
}

/// Mean losses over the batches, pairing day image `i` with night image
/// `i` and cycling the shorter list.
pub fn gan_losses(pair: &TranslatorPair, day: &[ImageBuffer], night: &[ImageBuffer], cfg: &GanConfig) -> Result<GanLosses> {
    if day.is_empty() || night.is_empty() {
        return Err(Error::Input("translator losses need day and night images".into()));
    }
    let n = day.len().max(night.len());
    let mut sum = GanLosses::default();
    for i in 0..n {
        let x = to_f64(&day[i % day.len()]);
        let y = to_f64(&night[i % night.len()]);
        sum.add(&gan_step(pair, &x, &y, cfg, false).0);
    }
    sum.scale(1.0 / n as f64);
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub lr: f64,
    #[serde(flatten)]
    pub losses: GanLosses,
}

#[derive(Debug, Clone)]
pub struct TranslatorOutcome {
    pub pair: TranslatorPair,
    pub trace: Vec<EpochRecord>,
}

fn random_crop(img: &ImageBuffer, crop: usize, rng: &mut impl Rng) -> Vec<f64> {
    let x0 = rng.random_range(0..=img.width() - crop);
    let y0 = rng.random_range(0..=img.height() - crop);
    let mut out = Vec::with_capacity(crop * crop * 3);
    let w = img.width();
    let data = img.as_slice();
    for y in y0..y0 + crop {
        let row = &data[3 * (y * w + x0)..3 * (y * w + x0 + crop)];
        out.extend(row.iter().map(|&v| v as f64));
    }
    out
}

/// Alternating discriminator and generator Adam updates on random crops.
/// One epoch visits every day image once, each paired with a random night
/// image. The learning rate is constant for the first half of the epochs
/// and decays linearly to zero over the second half. `init` warm-starts
/// from an existing pair.
pub fn train_translator_images(
    day: &[ImageBuffer],
    night: &[ImageBuffer],
    cfg: &GanConfig,
    init: Option<TranslatorPair>,
) -> Result<TranslatorOutcome> {
    cfg.check()?;
    if day.is_empty() || night.is_empty() {
        return Err(Error::Input("translator training needs day and night images".into()));
    }
    for img in day.iter().chain(night) {
        if img.width() < cfg.crop || img.height() < cfg.crop {
            return Err(Error::Validation(format!(
                "crop {} exceeds a {}x{} training image",
                cfg.crop,
                img.width(),
                img.height()
            )));
        }
    }
    let mut pair = match init {
        Some(p) => {
            p.check()?;
            p
        }
        None => TranslatorPair::init(&mut crate::rng::seeded(crate::rng::derive(cfg.seed, 1))),
    };
    let mut gen_state = OptimState::new(&pair.generators, cfg.adam());
    let mut disc_state = OptimState::new(&pair.discriminators, cfg.adam());
    let mut rng = crate::rng::seeded(crate::rng::derive(cfg.seed, 3));
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..day.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg.lr_base, Schedule::LinearDecay, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        let mut sum = GanLosses::default();
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<(Vec<f64>, Vec<f64>)> = chunk
                .iter()
                .map(|&i| {
                    let j = rng.random_range(0..night.len());
                    (random_crop(&day[i], cfg.crop, &mut rng), random_crop(&night[j], cfg.crop, &mut rng))
                })
                .collect();
            let inv = 1.0 / batch.len() as f64;

            let mut gd = pair.discriminators.zeros_like();
            for (x, y) in &batch {
                gd.add_assign(&gan_step(&pair, x, y, cfg, true).1.unwrap().discriminators);
            }
            gd.scale(inv);
            adam_step(&mut pair.discriminators, &gd, &mut disc_state, lr)?;

            let mut gg = pair.generators.zeros_like();
            for (x, y) in &batch {
                let (l, g) = gan_step(&pair, x, y, cfg, true);
                gg.add_assign(&g.unwrap().generators);
                sum.add(&l);
            }
            gg.scale(inv);
            adam_step(&mut pair.generators, &gg, &mut gen_state, lr)?;
        }
        sum.scale(1.0 / day.len() as f64);
        trace.push(EpochRecord {
            epoch,
            lr,
            losses: sum,
        });
    }
    pair.check()?;
    Ok(TranslatorOutcome { pair, trace })
}

/// Loads every image of both indexes and trains on them.
pub fn train_translator(
    day: &DatasetIndex,
    night: &DatasetIndex,
    cfg: &GanConfig,
    init: Option<TranslatorPair>,
) -> Result<TranslatorOutcome> {
    let load = |idx: &DatasetIndex| idx.entries.iter().map(|e| read_image(&e.image)).collect::<Result<Vec<_>>>();
    train_translator_images(&load(day)?, &load(night)?, cfg, init)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day_img(seed: u64) -> ImageBuffer {
        let mut rng = crate::rng::seeded(seed);
        let base: [f32; 3] = [rng.random_range(0.4..0.8), rng.random_range(0.4..0.8), rng.random_range(0.4..0.9)];
        ImageBuffer::from_fn(16, 12, |x, y| {
            let t = ((x + 2 * y) % 7) as f32 / 14.0;
            [base[0] * (0.6 + t), base[1] * (0.6 + t), base[2] * (0.7 + t * 0.5)]
        })
    }

    fn night_img(seed: u64) -> ImageBuffer {
        let d = day_img(seed + 100);
        ImageBuffer::from_fn(16, 12, |x, y| {
            let p = d.get(x, y);
            [0.3 * p[0] * p[0], 0.3 * p[1] * p[1], 0.35 * p[2] * p[2]]
        })
    }

    fn pixels(img: &ImageBuffer) -> Vec<f64> {
        to_f64(img)
    }

    #[test]
    fn identity_generators_have_zero_cycle_loss() {
        let l = gan_step(&TranslatorPair::identity(), &pixels(&day_img(1)), &pixels(&night_img(1)), &GanConfig::default(), false).0;
        assert_eq!(l.cyc, 0.0);
    }

    #[test]
    fn zero_cycle_weight_leaves_adversarial_terms() {
        let pair = TranslatorPair::init(&mut crate::rng::seeded(2));
        let cfg = GanConfig { lambda_cyc: 0.0, ..GanConfig::default() };
        let l = gan_step(&pair, &pixels(&day_img(1)), &pixels(&night_img(1)), &cfg, false).0;
        assert!(l.cyc > 0.0);
        assert_eq!(l.total, l.adv_g + l.adv_f);
    }

    fn gain_pair(g_gain: f64, f_gain: f64) -> TranslatorPair {
        let mut pair = TranslatorPair::identity();
        pair.generators.blocks[0].data[0..3].copy_from_slice(&[g_gain; 3]);
        pair.generators.blocks[1].data[0..3].copy_from_slice(&[f_gain; 3]);
        pair
    }

    #[test]
    fn inverse_gains_cycle_exactly_until_clamping() {
        let pair = gain_pair(0.5, 2.0);
        let dark: Vec<f64> = (0..48).map(|i| (i % 9) as f64 / 16.0).collect();
        let l = gan_step(&pair, &dark, &dark, &GanConfig::default(), false).0;
        assert_eq!(l.cyc, 0.0);
        let mut bright = dark.clone();
        bright[5] = 0.9;
        let l = gan_step(&pair, &dark, &bright, &GanConfig::default(), false).0;
        // F(0.9) clamps to 1, G gives 0.5.
        assert!((l.cyc - 0.4 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = crate::rng::seeded(9);
        let mut pair = TranslatorPair::init(&mut rng);
        for b in &mut pair.generators.blocks {
            b.data[9..12].iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
            b.data[12] = 4.0;
            b.data[13] = 0.5;
        }
        for b in &mut pair.discriminators.blocks {
            b.data.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let x = pixels(&day_img(4));
        let y = pixels(&night_img(4));
        for loss in [GanLoss::LeastSquares, GanLoss::Logistic] {
            let cfg = GanConfig {
                loss,
                identity_weight: 0.5,
                ..GanConfig::default()
            };
            let grads = gan_step(&pair, &x, &y, &cfg, true).1.unwrap();
            let h = 1e-5;
            for k in 0..pair.generators.len() {
                let v = pair.generators.get_flat(k);
                let eval = |d: f64| {
                    let mut p = pair.clone();
                    p.generators.set_flat(k, v + d);
                    gan_step(&p, &x, &y, &cfg, false).0.total
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = grads.generators.get_flat(k);
                let scale = numeric.abs().max(analytic.abs()).max(1e-6);
                assert!((numeric - analytic).abs() / scale < 1e-4, "gen {k}: {numeric} vs {analytic}");
            }
            for k in 0..pair.discriminators.len() {
                let v = pair.discriminators.get_flat(k);
                let eval = |d: f64| {
                    let mut p = pair.clone();
                    p.discriminators.set_flat(k, v + d);
                    let l = gan_step(&p, &x, &y, &cfg, false).0;
                    l.d_day + l.d_night
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = grads.discriminators.get_flat(k);
                let scale = numeric.abs().max(analytic.abs()).max(1e-6);
                assert!((numeric - analytic).abs() / scale < 1e-4, "disc {k}: {numeric} vs {analytic}");
            }
        }
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let day: Vec<_> = (0..4).map(day_img).collect();
        let night: Vec<_> = (0..4).map(night_img).collect();
        let cfg = GanConfig { epochs: 0, crop: 8, ..GanConfig::desk() };
        let out = train_translator_images(&day, &night, &cfg, None).unwrap();
        assert_eq!(out.pair, TranslatorPair::init(&mut crate::rng::seeded(crate::rng::derive(cfg.seed, 1))));
        let cfg = GanConfig { epochs: 5, crop: 8, ..GanConfig::desk() };
        let a = train_translator_images(&day, &night, &cfg, None).unwrap();
        let b = train_translator_images(&day, &night, &cfg, None).unwrap();
        assert_eq!(a.pair, b.pair);
        assert_eq!(a.trace.len(), 5);
    }

    #[test]
    fn training_darkens_towards_night() {
        let day: Vec<_> = (0..10).map(day_img).collect();
        let night: Vec<_> = (0..10).map(night_img).collect();
        let cfg = GanConfig { epochs: 60, crop: 12, ..GanConfig::desk() };
        let out = train_translator_images(&day, &night, &cfg, None).unwrap();
        let mean = |imgs: &[ImageBuffer]| {
            imgs.iter().map(|i| super::super::image_stats(i).mean).sum::<f64>() / imgs.len() as f64
        };
        let translated: Vec<_> = day.iter().map(|d| translate(d, &out.pair)).collect();
        let (m_t, m_n) = (mean(&translated), mean(&night));
        assert!((m_t - m_n).abs() < 0.05, "translated {m_t} night {m_n}");
        let first = out.trace[0].losses.cyc;
        let last = out.trace.last().unwrap().losses.cyc;
        assert!(last <= 0.5 * first, "cyc {first} -> {last}");
    }

    #[test]
    fn oversized_crop_is_rejected() {
        let cfg = GanConfig { crop: 64, ..GanConfig::desk() };
        let err = train_translator_images(&[day_img(0)], &[night_img(0)], &cfg, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
