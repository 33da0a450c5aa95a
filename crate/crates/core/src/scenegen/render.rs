use std::collections::BTreeMap;

use rand::Rng;

use super::lighting::{LightingSpec, Style};
use super::scene::{Rect, SceneGraph, ThingKind};
use crate::error::{Error, Result};
use crate::nightshift::{night_transform, Light, NightParams};
use crate::panoptic::{ClassId, ImageBuffer, LabelMap};

const MIN_SIDE: usize = 32;

/// Pixel ranges covered by a normalised rectangle; never empty.
fn pixel_span(a: f64, b: f64, n: usize) -> (usize, usize) {
    let lo = ((a * n as f64).floor().max(0.0) as usize).min(n - 1);
    let hi = (((b * n as f64).ceil() as usize).saturating_sub(1)).clamp(lo, n - 1);
    (lo, hi)
}

fn fill(
    r: &Rect,
    w: usize,
    h: usize,
    mut paint: impl FnMut(usize),
) {
    let (x0, x1) = pixel_span(r.x0, r.x1, w);
    let (y0, y1) = pixel_span(r.y0, r.y1, h);
    for y in y0..=y1 {
        for x in x0..=x1 {
            paint(y * w + x);
        }
    }
}

/// Renders the scene at `width × height`. The labels depend on geometry
/// only, so every lighting gives the same label map.
pub fn render(scene: &SceneGraph, lighting: &LightingSpec, width: usize, height: usize) -> Result<(ImageBuffer, LabelMap)> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::Validation(format!(
            "render size {width}x{height} is below {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    lighting.check()?;
    let (w, h) = (width, height);
    let n = w * h;
    let [road, sidewalk, building, vegetation, sky, ..] = scene.classes;
    let mut sem = vec![sky; n];
    let mut color = vec![scene.sky_color; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];

    for y in 0..h {
        let v = (y as f64 + 0.5) / h as f64;
        for x in 0..w {
            let u = (x as f64 + 0.5) / w as f64;
            let i = y * w + x;
            if v > scene.horizon {
                sem[i] = vegetation;
                color[i] = scene.grass_color;
            } else if let Some(b) = scene.buildings.iter().find(|b| u >= b.x0 && u < b.x1 && v >= b.top) {
                sem[i] = building;
                color[i] = b.color;
            }
            for blob in &scene.vegetation {
                if ((u - blob.cx) / blob.rx).powi(2) + ((v - blob.cy) / blob.ry).powi(2) <= 1.0 {
                    sem[i] = vegetation;
                    color[i] = blob.color;
                }
            }
            if let (Some((rl, rr)), Some((sl, sr))) = (scene.road_span(v), scene.sidewalk_span(v)) {
                if u >= rl && u < rr {
                    sem[i] = road;
                    color[i] = scene.road_color;
                } else if u >= sl && u < sr {
                    sem[i] = sidewalk;
                    color[i] = scene.sidewalk_color;
                }
            }
        }
    }

    for (k, thing) in scene.things.iter().enumerate() {
        let class = scene.class_of(thing.kind);
        for (rect, c) in &thing.parts {
            fill(rect, w, h, |i| {
                sem[i] = class;
                color[i] = *c;
                owner[i] = Some(k);
            });
        }
    }

    let mut inst = vec![0u32; n];
    let mut dense: BTreeMap<usize, u32> = BTreeMap::new();
    let mut next: BTreeMap<ClassId, u32> = BTreeMap::new();
    for i in 0..n {
        if let Some(k) = owner[i] {
            if !scene.instanced[scene_slot(scene.things[k].kind)] {
                continue;
            }
            let id = *dense.entry(k).or_insert_with(|| {
                let c = next.entry(sem[i]).or_insert(0);
                *c += 1;
                *c
            });
            inst[i] = id;
        }
    }
    let labels = LabelMap::from_parts(w, h, sem, inst)?;

    let mut img = ImageBuffer::from_fn(w, h, |x, y| color[y * w + x]);
    if lighting.style == Style::Night {
        for px in img.as_mut_slice().chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = (px[c] as f64 * lighting.tint[c]).min(1.0) as f32;
            }
        }
        let params = NightParams {
            gain: lighting.ambient,
            gamma: lighting.gamma,
            contrast: lighting.contrast,
            noise_sigma: lighting.noise_sigma,
            blur_radius: lighting.blur_radius,
            lights: scene_lights(scene, lighting, w, h),
            seed: crate::rng::derive(scene.seed ^ lighting.seed, 0x6e6f697365),
        };
        img = night_transform(&img, &params);
    }
    Ok((img, labels))
}

fn scene_slot(kind: ThingKind) -> usize {
    match kind {
        ThingKind::Pole => 5,
        ThingKind::TrafficLight => 6,
        ThingKind::Car => 7,
        ThingKind::Person => 8,
    }
}

/// Light sources of a night render in pixel coordinates.
pub fn scene_lights(scene: &SceneGraph, lighting: &LightingSpec, w: usize, h: usize) -> Vec<Light> {
    if lighting.style == Style::Day {
        return Vec::new();
    }
    let mut rng = crate::rng::seeded(crate::rng::derive(scene.seed ^ lighting.seed, 0x6c69676874));
    let intensity = |rng: &mut rand_chacha::ChaCha8Rng| {
        if lighting.glow_max > lighting.glow_min {
            rng.random_range(lighting.glow_min..lighting.glow_max)
        } else {
            lighting.glow_min
        }
    };
    let to_px = |u: f64, v: f64| (u * w as f64 - 0.5, v * h as f64 - 0.5);
    let base_r = lighting.glow_radius * h as f64;
    let mut lights = Vec::new();
    for thing in &scene.things {
        let r = base_r * (0.5 + thing.scale);
        match thing.kind {
            ThingKind::Pole if lighting.streetlights => {
                for &(u, v) in &thing.lamps {
                    let (x, y) = to_px(u, v);
                    let i = intensity(&mut rng);
                    lights.push(Light { x, y, radius: r, intensity: i, hue: 38.0 });
                }
            }
            ThingKind::TrafficLight if lighting.traffic_lights => {
                let hue = if rng.random_bool(0.5) { 0.0 } else { 130.0 };
                for &(u, v) in &thing.lamps {
                    let (x, y) = to_px(u, v);
                    let i = intensity(&mut rng);
                    lights.push(Light { x, y, radius: 0.5 * r, intensity: i, hue });
                }
            }
            ThingKind::Car
                if lighting.headlight_prob > 0.0 && rng.random_bool(lighting.headlight_prob) => {
                    let i = intensity(&mut rng);
                    for &(u, v) in &thing.lamps {
                        let (x, y) = to_px(u, v);
                        lights.push(Light { x, y, radius: 0.5 * r, intensity: i, hue: 55.0 });
                    }
                }
            _ => {}
        }
    }
    for _ in 0..lighting.window_lights {
        let b = &scene.buildings[rng.random_range(0..scene.buildings.len())];
        if scene.horizon - b.top < 0.05 {
            continue;
        }
        let u = rng.random_range(b.x0..b.x1);
        let v = rng.random_range(b.top + 0.02..scene.horizon - 0.02);
        let (x, y) = to_px(u, v);
        let i = 0.6 * intensity(&mut rng);
        lights.push(Light { x, y, radius: 0.35 * base_r, intensity: i, hue: 45.0 });
    }
    lights
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panoptic::{validate, ClassCatalog};
    use crate::scenegen::{compose_scene, SceneConfig};

    #[test]
    fn labels_ignore_lighting_and_validate() {
        let cat = ClassCatalog::desk();
        for seed in 0..20 {
            let s = compose_scene(seed, &cat, &SceneConfig::default()).unwrap();
            let (day, a) = render(&s, &LightingSpec::day(), 128, 64).unwrap();
            let (night, b) = render(&s, &LightingSpec::night(), 128, 64).unwrap();
            assert_eq!(a, b);
            assert!(validate(&a, &cat).is_pass());
            assert!(a.sem().iter().all(|&c| cat.contains(c)));
            let mean = |img: &ImageBuffer| crate::nightshift::image_stats(img).mean;
            assert!(mean(&night) < mean(&day));
        }
    }

    #[test]
    fn every_thing_is_one_instance() {
        let cat = ClassCatalog::desk();
        for seed in 0..50 {
            let s = compose_scene(seed, &cat, &SceneConfig::default()).unwrap();
            let (_, labels) = render(&s, &LightingSpec::day(), 128, 64).unwrap();
            let instances = labels.segment_areas(cat.void_id()).keys().filter(|k| k.1 > 0).count();
            assert_eq!(instances, s.things.len(), "seed {seed}");
        }
    }

    #[test]
    fn cityscapes_poles_are_stuff() {
        let cat = ClassCatalog::cityscapes();
        let s = (0..20)
            .map(|seed| compose_scene(seed, &cat, &SceneConfig::default()).unwrap())
            .find(|s| s.things.iter().any(|t| t.kind == ThingKind::Pole))
            .unwrap();
        let (_, labels) = render(&s, &LightingSpec::day(), 128, 64).unwrap();
        assert!(validate(&labels, &cat).is_pass());
        let pole = cat.id_of("pole").unwrap();
        assert!(labels.sem().iter().zip(labels.inst()).all(|(&c, &k)| c != pole || k == 0));
    }

    #[test]
    fn headlights_exceed_ambient_maximum() {
        let cat = ClassCatalog::desk();
        let s = (0..50)
            .map(|seed| compose_scene(seed, &cat, &SceneConfig::default()).unwrap())
            .find(|s| s.things.iter().any(|t| t.kind == ThingKind::Car))
            .unwrap();
        let lit = LightingSpec {
            headlight_prob: 1.0,
            streetlights: false,
            traffic_lights: false,
            window_lights: 0,
            noise_sigma: 0.0,
            ..LightingSpec::night()
        };
        let dark = LightingSpec { headlight_prob: 0.0, ..lit.clone() };
        let max_lum = |img: &ImageBuffer| {
            (0..img.height())
                .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
                .map(|(x, y)| img.luminance(x, y))
                .fold(0.0f32, f32::max)
        };
        let (a, _) = render(&s, &lit, 128, 64).unwrap();
        let (b, _) = render(&s, &dark, 128, 64).unwrap();
        assert!(max_lum(&a) > max_lum(&b));
    }

    #[test]
    fn small_dims_are_rejected() {
        let s = compose_scene(1, &ClassCatalog::desk(), &SceneConfig::default()).unwrap();
        assert!(render(&s, &LightingSpec::day(), 31, 64).is_err());
    }
}
