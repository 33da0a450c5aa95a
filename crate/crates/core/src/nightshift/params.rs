use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panoptic::ImageBuffer;

/// An additive colored glow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    /// Pixel coordinates of the glow center.
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub intensity: f64,
    /// Hue in degrees.
    pub hue: f64,
}

impl Light {
    pub fn rgb(&self) -> [f64; 3] {
        hsv_to_rgb(self.hue, 0.35, 1.0)
    }

    /// Glow strength at distance `d` from the center. Gaussian with σ equal
    /// to half the radius, cut off at three radii.
    pub fn glow(&self, d: f64) -> f64 {
        if self.radius <= 0.0 || d > 3.0 * self.radius {
            return 0.0;
        }
        let s = 0.5 * self.radius;
        self.intensity * (-d * d / (2.0 * s * s)).exp()
    }
}

pub(crate) fn hsv_to_rgb(hue: f64, s: f64, v: f64) -> [f64; 3] {
    let h = hue.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Parameters of the deterministic night transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NightParams {
    pub gain: f64,
    pub gamma: f64,
    pub contrast: f64,
    pub noise_sigma: f64,
    pub blur_radius: usize,
    pub lights: Vec<Light>,
    pub seed: u64,
}

impl Default for NightParams {
    /// The identity transform.
    fn default() -> Self {
        NightParams {
            gain: 1.0,
            gamma: 1.0,
            contrast: 0.0,
            noise_sigma: 0.0,
            blur_radius: 0,
            lights: Vec::new(),
            seed: 0,
        }
    }
}

impl NightParams {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("night parameter {what}")));
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return bad("gain must be in (0, 1]");
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return bad("gamma must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return bad("contrast must be in [0, 1]");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        for l in &self.lights {
            let vals = [l.x, l.y, l.radius, l.intensity, l.hue];
            if vals.iter().any(|v| !v.is_finite()) || l.radius < 0.0 || l.intensity < 0.0 {
                return bad("lights need finite values and non-negative radius and intensity");
            }
        }
        Ok(())
    }

    /// Same parameters with a different noise seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        NightParams {
            seed,
            ..self.clone()
        }
    }

    /// `key = value` lines. Each light is a `light = x y radius intensity hue`
    /// line. `#` starts a comment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "gain = {}", self.gain).unwrap();
        writeln!(s, "gamma = {}", self.gamma).unwrap();
        writeln!(s, "contrast = {}", self.contrast).unwrap();
        writeln!(s, "noise_sigma = {}", self.noise_sigma).unwrap();
        writeln!(s, "blur_radius = {}", self.blur_radius).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        for l in &self.lights {
            writeln!(s, "light = {} {} {} {} {}", l.x, l.y, l.radius, l.intensity, l.hue).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = NightParams::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Format(format!("line {}: {msg}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(&format!("bad number {v:?}")));
            match key.trim() {
                "gain" => p.gain = num(value)?,
                "gamma" => p.gamma = num(value)?,
                "contrast" => p.contrast = num(value)?,
                "noise_sigma" => p.noise_sigma = num(value)?,
                "blur_radius" => p.blur_radius = value.parse().map_err(|_| err("bad blur_radius"))?,
                "seed" => p.seed = value.parse().map_err(|_| err("bad seed"))?,
                "light" => {
                    let v = value.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                    if v.len() != 5 {
                        return Err(err("light needs x y radius intensity hue"));
                    }
                    p.lights.push(Light {
                        x: v[0],
                        y: v[1],
                        radius: v[2],
                        intensity: v[3],
                        hue: v[4],
                    });
                }
                other => return Err(err(&format!("unknown key {other:?}"))),
            }
        }
        p.check()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Gain and gamma, contrast loss, blur, light glows, then noise. The output
/// is clamped to `[0, 1]`.
pub fn night_transform(img: &ImageBuffer, p: &NightParams) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let mut v: Vec<f32> = img.as_slice().to_vec();
    if p.gain != 1.0 || p.gamma != 1.0 {
        for x in &mut v {
            *x = (p.gain * (*x as f64).powf(p.gamma)) as f32;
        }
    }
    if p.contrast != 0.0 && !v.is_empty() {
        let n = (w * h) as f64;
        let mut mean = [0.0f64; 3];
        for px in v.chunks_exact(3) {
            for c in 0..3 {
                mean[c] += px[c] as f64;
            }
        }
        for px in v.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = ((1.0 - p.contrast) * px[c] as f64 + p.contrast * mean[c] / n) as f32;
            }
        }
    }
    if p.blur_radius > 0 {
        v = box_blur(&v, w, h, p.blur_radius);
    }
    for l in &p.lights {
        let rgb = l.rgb();
        let reach = 3.0 * l.radius;
        let x0 = (l.x - reach).floor().max(0.0) as usize;
        let y0 = (l.y - reach).floor().max(0.0) as usize;
        let x1 = ((l.x + reach).ceil().max(0.0) as usize).min(w.saturating_sub(1));
        let y1 = ((l.y + reach).ceil().max(0.0) as usize).min(h.saturating_sub(1));
        if w == 0 || h == 0 || x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - l.x).powi(2) + (y as f64 - l.y).powi(2)).sqrt();
                let g = l.glow(d);
                if g > 0.0 {
                    let i = 3 * (y * w + x);
                    for c in 0..3 {
                        v[i + c] = (v[i + c] as f64 + g * rgb[c]) as f32;
                    }
                }
            }
        }
    }
    if p.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, p.noise_sigma).expect("checked sigma");
        let mut rng = crate::rng::seeded(p.seed);
        for x in &mut v {
            *x = (*x as f64 + normal.sample(&mut rng)) as f32;
        }
    }
    let mut out = ImageBuffer::from_fn(w, h, |_, _| [0.0; 3]);
    out.as_mut_slice().copy_from_slice(&v);
    out.clamp_in_place();
    out
}

/// Separable mean filter with edge-replicated borders.
fn box_blur(v: &[f32], w: usize, h: usize, r: usize) -> Vec<f32> {
    let k = (2 * r + 1) as f64;
    let ri = r as isize;
    let mut tmp = vec![0.0f32; v.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0.0f64;
                for d in -ri..=ri {
                    let xx = (x as isize + d).clamp(0, w as isize - 1) as usize;
                    s += v[3 * (y * w + xx) + c] as f64;
                }
                tmp[3 * (y * w + x) + c] = (s / k) as f32;
            }
        }
    }
    let mut out = vec![0.0f32; v.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0.0f64;
                for d in -ri..=ri {
                    let yy = (y as isize + d).clamp(0, h as isize - 1) as usize;
                    s += tmp[3 * (yy * w + x) + c] as f64;
                }
                out[3 * (y * w + x) + c] = (s / k) as f32;
            }
        }
    }
    out
}
