use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::learner::ParamSet;
use crate::panoptic::ImageBuffer;

/// Parameters per generator: per-channel gain `a`, log-exponent `g`, bias
/// `b` and highlight weight `h`, then the highlight slope and threshold.
pub const GEN_PARAMS: usize = 14;
/// Soft 24-bin histograms of Y, Cb and Cr.
pub const DISC_FEATURES: usize = 72;

const BINS: usize = 24;
const POW_FLOOR: f64 = 1e-6;
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];
const YCC: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
];
const YCC_OFFSET: [f64; 3] = [0.0, 0.5, 0.5];

pub(crate) const G: usize = 0;
pub(crate) const F: usize = 1;
pub(crate) const D_DAY: usize = 0;
pub(crate) const D_NIGHT: usize = 1;

/// Generator `G` (day to night), its inverse `F`, and one discriminator
/// per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorPair {
    /// Blocks `G` and `F`.
    pub generators: ParamSet,
    /// Blocks `D_day` and `D_night`: weights then bias.
    pub discriminators: ParamSet,
}

fn identity_gen() -> Vec<f64> {
    let mut p = vec![0.0; GEN_PARAMS];
    p[0..3].copy_from_slice(&[1.0; 3]);
    p[12] = 8.0;
    p[13] = 0.8;
    p
}

impl TranslatorPair {
    /// Both generators are the identity, both discriminators output 0.5.
    pub fn identity() -> Self {
        let mut generators = ParamSet::default();
        generators.push("G", identity_gen());
        generators.push("F", identity_gen());
        let mut discriminators = ParamSet::default();
        discriminators.push("D_day", vec![0.0; DISC_FEATURES + 1]);
        discriminators.push("D_night", vec![0.0; DISC_FEATURES + 1]);
        TranslatorPair {
            generators,
            discriminators,
        }
    }

    /// Generators jittered around the identity, small random discriminators.
    pub fn init(rng: &mut impl Rng) -> Self {
        let mut pair = Self::identity();
        for b in &mut pair.generators.blocks {
            for c in 0..3 {
                b.data[c] += rng.random_range(-0.2..0.2);
                b.data[3 + c] += rng.random_range(-0.2..0.2);
                b.data[6 + c] += rng.random_range(-0.05..0.05);
                b.data[9 + c] += rng.random_range(-0.05..0.05);
            }
        }
        for b in &mut pair.discriminators.blocks {
            for v in &mut b.data[..DISC_FEATURES] {
                *v = rng.random_range(-0.1..0.1);
            }
        }
        pair
    }

    pub fn g(&self) -> &[f64] {
        &self.generators.blocks[G].data
    }

    pub fn f(&self) -> &[f64] {
        &self.generators.blocks[F].data
    }

    pub fn d_day(&self) -> &[f64] {
        &self.discriminators.blocks[D_DAY].data
    }

    pub fn d_night(&self) -> &[f64] {
        &self.discriminators.blocks[D_NIGHT].data
    }

    pub fn check(&self) -> Result<()> {
        let shapes_ok = self.generators.blocks.len() == 2
            && self.discriminators.blocks.len() == 2
            && self.generators.blocks.iter().all(|b| b.data.len() == GEN_PARAMS)
            && self.discriminators.blocks.iter().all(|b| b.data.len() == DISC_FEATURES + 1);
        if !shapes_ok {
            return Err(Error::Format("translator parameter shapes are wrong".into()));
        }
        let name = self.generators.first_non_finite().or(self.discriminators.first_non_finite());
        if let Some(name) = name {
            return Err(Error::Numeric(format!("non-finite translator parameter in {name}")));
        }
        Ok(())
    }

    /// Probability that `img` is a night image according to `D_night`.
    pub fn night_score(&self, img: &ImageBuffer) -> f64 {
        let v = to_f64(img);
        disc_score(self.d_night(), &disc_features(&v))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for b in self.generators.blocks.iter().chain(&self.discriminators.blocks) {
            out.extend_from_slice(&(b.data.len() as u64).to_le_bytes());
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let bad = || Error::Format("not a valid translator checkpoint".into());
        if buf.len() < 12 || &buf[..8] != MAGIC {
            return Err(bad());
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported translator version {version}")));
        }
        let mut pos = 12;
        let mut pair = Self::identity();
        for b in pair.generators.blocks.iter_mut().chain(pair.discriminators.blocks.iter_mut()) {
            let len_bytes = buf.get(pos..pos + 8).ok_or_else(bad)?;
            let len = u64::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
            pos += 8;
            if len != b.data.len() {
                return Err(bad());
            }
            for v in &mut b.data {
                let bytes = buf.get(pos..pos + 8).ok_or_else(bad)?;
                *v = f64::from_le_bytes(bytes.try_into().unwrap());
                pos += 8;
            }
        }
        if pos != buf.len() {
            return Err(bad());
        }
        pair.check()?;
        Ok(pair)
    }

    /// Writes the checkpoint and returns its sha256.
    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(crate::hash::sha256_hex(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

const MAGIC: &[u8; 8] = b"NOCTGAN1";
const VERSION: u32 = 1;

/// Applies `G` to the whole image.
pub fn translate(img: &ImageBuffer, pair: &TranslatorPair) -> ImageBuffer {
    let v = to_f64(img);
    let mut out = vec![0.0; v.len()];
    gen_forward(pair.g(), &v, &mut out);
    let data = out.iter().map(|&x| x as f32).collect();
    ImageBuffer::from_vec(img.width(), img.height(), data).expect("generator output is clamped")
}

pub(crate) fn to_f64(img: &ImageBuffer) -> Vec<f64> {
    img.as_slice().iter().map(|&v| v as f64).collect()
}

pub(crate) fn sigmoid(a: f64) -> f64 {
    crate::learner::sigmoid(a)
}

struct GenPixel {
    base: [f64; 3],
    pow: [f64; 3],
    s: f64,
    pre: [f64; 3],
}

fn gen_pixel(p: &[f64], x: &[f64]) -> GenPixel {
    let lum = LUMA[0] * x[0] + LUMA[1] * x[1] + LUMA[2] * x[2];
    let s = sigmoid(p[12] * (lum - p[13]));
    let mut base = [0.0; 3];
    let mut pow = [0.0; 3];
    let mut pre = [0.0; 3];
    for c in 0..3 {
        base[c] = x[c];
        pow[c] = if x[c] > 0.0 { x[c].powf(p[3 + c].exp()) } else { 0.0 };
        pre[c] = p[c] * pow[c] + p[6 + c] + p[9 + c] * s;
    }
    GenPixel { base, pow, s, pre }
}

/// `out_c = clamp(a_c · x_c^exp(g_c) + b_c + h_c · σ(κ(lum − τ)), 0, 1)`.
pub(crate) fn gen_forward(p: &[f64], input: &[f64], out: &mut [f64]) {
    for (x, o) in input.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
        let px = gen_pixel(p, x);
        for c in 0..3 {
            o[c] = px.pre[c].clamp(0.0, 1.0);
        }
    }
}

/// Accumulates parameter gradients, and input gradients when asked, given
/// the gradient of the loss with respect to the generator output.
pub(crate) fn gen_backward(p: &[f64], input: &[f64], upstream: &[f64], gp: &mut [f64], mut gin: Option<&mut [f64]>) {
    for (i, (x, up)) in input.chunks_exact(3).zip(upstream.chunks_exact(3)).enumerate() {
        if up.iter().all(|&u| u == 0.0) {
            continue;
        }
        let px = gen_pixel(p, x);
        let mut ds = 0.0;
        let mut gx = [0.0; 3];
        for c in 0..3 {
            if !(px.pre[c] > 0.0 && px.pre[c] < 1.0) {
                continue;
            }
            let d = up[c];
            let e = p[3 + c].exp();
            gp[c] += d * px.pow[c];
            if x[c] > 0.0 {
                gp[3 + c] += d * p[c] * px.pow[c] * px.base[c].ln() * e;
            }
            gp[6 + c] += d;
            gp[9 + c] += d * px.s;
            ds += d * p[9 + c];
            if x[c] > POW_FLOOR {
                gx[c] += d * p[c] * e * px.pow[c] / px.base[c];
            }
        }
        let lum = LUMA[0] * x[0] + LUMA[1] * x[1] + LUMA[2] * x[2];
        let dsig = ds * px.s * (1.0 - px.s);
        gp[12] += dsig * (lum - p[13]);
        gp[13] -= dsig * p[12];
        if let Some(g) = gin.as_deref_mut() {
            let dl = dsig * p[12];
            for c in 0..3 {
                g[3 * i + c] += gx[c] + dl * LUMA[c];
            }
        }
    }
}

fn bin_position(v: f64) -> (usize, f64, bool) {
    let raw = BINS as f64 * v - 0.5;
    let inside = raw > 0.0 && raw < (BINS - 1) as f64;
    let u = raw.clamp(0.0, (BINS - 1) as f64);
    let l = (u.floor() as usize).min(BINS - 2);
    (l, u - l as f64, inside)
}

fn ycc(x: &[f64]) -> [f64; 3] {
    let mut out = YCC_OFFSET;
    for (k, row) in YCC.iter().enumerate() {
        out[k] += row[0] * x[0] + row[1] * x[1] + row[2] * x[2];
    }
    out
}

/// Normalised soft histograms of Y, Cb and Cr with linear bin interpolation.
pub fn disc_features(img: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; DISC_FEATURES];
    let n = (img.len() / 3).max(1) as f64;
    for x in img.chunks_exact(3) {
        for (k, v) in ycc(x).into_iter().enumerate() {
            let (l, f, _) = bin_position(v);
            h[k * BINS + l] += (1.0 - f) / n;
            h[k * BINS + l + 1] += f / n;
        }
    }
    h
}

pub(crate) fn disc_score(p: &[f64], feats: &[f64]) -> f64 {
    let z: f64 = p[DISC_FEATURES] + feats.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    sigmoid(z)
}

/// Backpropagates `d_score` (the loss gradient with respect to the
/// discriminator probability) into the parameters and, optionally, the image.
pub(crate) fn disc_backward(
    p: &[f64],
    img: &[f64],
    feats: &[f64],
    d_score: f64,
    gp: Option<&mut [f64]>,
    gimg: Option<&mut [f64]>,
) {
    let s = disc_score(p, feats);
    let dz = d_score * s * (1.0 - s);
    if let Some(gp) = gp {
        for (g, f) in gp.iter_mut().zip(feats) {
            *g += dz * f;
        }
        gp[DISC_FEATURES] += dz;
    }
    if let Some(gi) = gimg {
        let n = (img.len() / 3).max(1) as f64;
        for (i, x) in img.chunks_exact(3).enumerate() {
            for (k, v) in ycc(x).into_iter().enumerate() {
                let (l, _, inside) = bin_position(v);
                if !inside {
                    continue;
                }
                let dv = dz * (p[k * BINS + l + 1] - p[k * BINS + l]) * BINS as f64 / n;
                for c in 0..3 {
                    gi[3 * i + c] += dv * YCC[k][c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pair_leaves_images_alone() {
        let img = ImageBuffer::from_fn(5, 4, |x, y| [x as f32 / 4.0, y as f32 / 3.0, 0.5]);
        let out = translate(&img, &TranslatorPair::identity());
        assert_eq!(out, img);
    }

    #[test]
    fn histograms_sum_to_one_per_channel() {
        let img: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).fract()).collect();
        let h = disc_features(&img);
        for k in 0..3 {
            let s: f64 = h[k * BINS..(k + 1) * BINS].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let pair = TranslatorPair::init(&mut crate::rng::seeded(3));
        assert_eq!(TranslatorPair::from_bytes(&pair.to_bytes()).unwrap(), pair);
        let bytes = pair.to_bytes();
        assert!(TranslatorPair::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
