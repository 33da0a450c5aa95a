use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panoptic::{ClassCatalog, ClassId};

/// Upper bounds on generated objects. Counts are drawn uniformly from
/// `0..=max`; buildings from `1..=max_buildings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub max_cars: usize,
    pub max_persons: usize,
    pub max_poles: usize,
    pub max_traffic_lights: usize,
    pub max_buildings: usize,
    pub max_vegetation: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            max_cars: 6,
            max_persons: 4,
            max_poles: 5,
            max_traffic_lights: 3,
            max_buildings: 4,
            max_vegetation: 3,
        }
    }
}

impl SceneConfig {
    pub fn stuff_only() -> Self {
        SceneConfig {
            max_cars: 0,
            max_persons: 0,
            max_poles: 0,
            max_traffic_lights: 0,
            ..SceneConfig::default()
        }
    }
}

/// Axis-aligned rectangle in normalised image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    fn union(&self, o: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(o.x0),
            y0: self.y0.min(o.y0),
            x1: self.x1.max(o.x1),
            y1: self.y1.max(o.y1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThingKind {
    Pole,
    TrafficLight,
    Car,
    Person,
}

impl ThingKind {
    pub fn class_name(self) -> &'static str {
        match self {
            ThingKind::Pole => "pole",
            ThingKind::TrafficLight => "traffic light",
            ThingKind::Car => "car",
            ThingKind::Person => "person",
        }
    }
}

/// A countable object made of one or more flat-colored rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thing {
    pub kind: ThingKind,
    pub parts: Vec<(Rect, [f32; 3])>,
    /// Light anchors in normalised coordinates: lamp tops, headlights.
    pub lamps: Vec<(f64, f64)>,
    /// Perspective scale, 1 at the bottom edge of the image.
    pub scale: f64,
}

impl Thing {
    pub fn bbox(&self) -> Rect {
        self.parts.iter().skip(1).fold(self.parts[0].0, |r, p| r.union(&p.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub x0: f64,
    pub x1: f64,
    pub top: f64,
    pub color: [f32; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub color: [f32; 3],
}

/// Geometry of one street scene, independent of resolution and lighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub seed: u64,
    pub horizon: f64,
    pub vanish_x: f64,
    /// Road edges at the bottom of the image; it narrows to a point at the
    /// vanishing point.
    pub road: (f64, f64),
    /// Outer sidewalk edges at the bottom of the image.
    pub sidewalk: (f64, f64),
    pub sky_color: [f32; 3],
    pub road_color: [f32; 3],
    pub sidewalk_color: [f32; 3],
    pub grass_color: [f32; 3],
    pub buildings: Vec<Block>,
    pub vegetation: Vec<Blob>,
    /// In painting order: poles, traffic lights, cars, persons.
    pub things: Vec<Thing>,
    /// Class ids for road, sidewalk, building, vegetation, sky, pole,
    /// traffic light, car, person.
    pub classes: [ClassId; 9],
    /// Whether each of those classes is a thing in the catalog.
    pub instanced: [bool; 9],
}

pub(crate) const CLASS_NAMES: [&str; 9] = [
    "road",
    "sidewalk",
    "building",
    "vegetation",
    "sky",
    "pole",
    "traffic light",
    "car",
    "person",
];

impl SceneGraph {
    /// Horizontal edges of the road at row `v`, or `None` above the horizon.
    pub fn road_span(&self, v: f64) -> Option<(f64, f64)> {
        self.span(v, self.road)
    }

    pub fn sidewalk_span(&self, v: f64) -> Option<(f64, f64)> {
        self.span(v, self.sidewalk)
    }

    fn span(&self, v: f64, bottom: (f64, f64)) -> Option<(f64, f64)> {
        if v <= self.horizon {
            return None;
        }
        let t = (v - self.horizon) / (1.0 - self.horizon);
        Some((
            self.vanish_x + t * (bottom.0 - self.vanish_x),
            self.vanish_x + t * (bottom.1 - self.vanish_x),
        ))
    }

    pub(crate) fn class_of(&self, kind: ThingKind) -> ClassId {
        match kind {
            ThingKind::Pole => self.classes[5],
            ThingKind::TrafficLight => self.classes[6],
            ThingKind::Car => self.classes[7],
            ThingKind::Person => self.classes[8],
        }
    }
}

fn jitter(rng: &mut impl Rng, base: [f32; 3], amount: f32) -> [f32; 3] {
    base.map(|c| (c + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

const CAR_COLORS: [[f32; 3]; 6] = [
    [0.75, 0.12, 0.1],
    [0.12, 0.22, 0.7],
    [0.92, 0.92, 0.9],
    [0.08, 0.08, 0.09],
    [0.62, 0.64, 0.66],
    [0.85, 0.7, 0.15],
];
const BUILDING_COLORS: [[f32; 3]; 4] = [[0.55, 0.52, 0.5], [0.62, 0.45, 0.35], [0.72, 0.68, 0.58], [0.42, 0.44, 0.48]];
const CLOTHES: [[f32; 3]; 5] = [[0.2, 0.25, 0.55], [0.55, 0.15, 0.2], [0.15, 0.15, 0.15], [0.85, 0.8, 0.3], [0.3, 0.5, 0.3]];

/// Draws a scene for `seed`. The catalog must name all nine scene classes.
pub fn compose_scene(seed: u64, catalog: &ClassCatalog, cfg: &SceneConfig) -> Result<SceneGraph> {
    let mut classes = [0 as ClassId; 9];
    for (slot, name) in classes.iter_mut().zip(CLASS_NAMES) {
        *slot = catalog
            .id_of(name)
            .ok_or_else(|| Error::Input(format!("catalog has no {name:?} class needed by the scene generator")))?;
    }
    if cfg.max_buildings == 0 {
        return Err(Error::Validation("scenes need at least one building".into()));
    }
    let mut rng = crate::rng::seeded(seed);
    let horizon = rng.random_range(0.38..0.48);
    let vanish_x = rng.random_range(0.4..0.6);
    let road = (rng.random_range(0.05..0.2), rng.random_range(0.8..0.95));
    let sidewalk = (road.0 - rng.random_range(0.25..0.45), road.1 + rng.random_range(0.25..0.45));

    let n_blocks = rng.random_range(1..=cfg.max_buildings);
    let mut cuts: Vec<f64> = (0..n_blocks - 1).map(|_| rng.random_range(0.1..0.9)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = vec![0.0];
    edges.extend(cuts);
    edges.push(1.0);
    let buildings = edges
        .windows(2)
        .map(|e| {
            let base = BUILDING_COLORS[rng.random_range(0..BUILDING_COLORS.len())];
            Block {
                x0: e[0],
                x1: e[1],
                top: rng.random_range(0.06..horizon - 0.12),
                color: jitter(&mut rng, base, 0.05),
            }
        })
        .collect();

    let n_veg = rng.random_range(1..=cfg.max_vegetation.max(1));
    let vegetation = (0..n_veg)
        .map(|_| Blob {
            cx: rng.random_range(0.0..1.0),
            cy: rng.random_range(horizon - 0.12..horizon - 0.02),
            rx: rng.random_range(0.06..0.12),
            ry: rng.random_range(0.08..0.16),
            color: jitter(&mut rng, [0.2, 0.45, 0.18], 0.06),
        })
        .collect();

    let mut scene = SceneGraph {
        seed,
        horizon,
        vanish_x,
        road,
        sidewalk,
        sky_color: jitter(&mut rng, [0.55, 0.72, 0.92], 0.05),
        road_color: jitter(&mut rng, [0.33, 0.33, 0.36], 0.03),
        sidewalk_color: jitter(&mut rng, [0.66, 0.62, 0.58], 0.04),
        grass_color: jitter(&mut rng, [0.3, 0.5, 0.22], 0.05),
        buildings,
        vegetation,
        things: Vec::new(),
        classes,
        instanced: classes.map(|c| catalog.is_thing(c)),
    };

    let counts = [
        rng.random_range(0..=cfg.max_poles),
        rng.random_range(0..=cfg.max_traffic_lights),
        rng.random_range(0..=cfg.max_cars),
        rng.random_range(0..=cfg.max_persons),
    ];
    let mut boxes: Vec<Rect> = Vec::new();
    let mut poles: Vec<(Rect, f64, bool)> = Vec::new();

    for _ in 0..counts[0] {
        for _ in 0..30 {
            let t = rng.random_range(0.15..0.9);
            let Some(t) = place_on_sidewalk(&scene, t, &mut rng) else { continue };
            let (v, x, s, side) = t;
            let h = 0.55 * s + 0.12;
            let w = 0.01 * s + 0.004;
            let r = Rect { x0: x - w / 2.0, x1: x + w / 2.0, y0: (v - h).max(0.02), y1: v };
            if boxes.iter().any(|b| b.overlaps(&r)) {
                continue;
            }
            boxes.push(r);
            poles.push((r, s, side));
            scene.things.push(Thing {
                kind: ThingKind::Pole,
                parts: vec![(r, jitter(&mut rng, [0.28, 0.28, 0.3], 0.03))],
                lamps: vec![((r.x0 + r.x1) / 2.0, r.y0)],
                scale: s,
            });
            break;
        }
    }

    let mut free: Vec<usize> = (0..poles.len()).collect();
    for _ in 0..counts[1] {
        if free.is_empty() {
            break;
        }
        let k = free.remove(rng.random_range(0..free.len()));
        let (pole, s, left) = poles[k];
        let w = 0.02 * s + 0.008;
        let h = 0.07 * s + 0.03;
        // Hang the box on the road side of the pole, just below its top.
        let x0 = if left { pole.x1 } else { pole.x0 - w };
        let r = Rect { x0, x1: x0 + w, y0: pole.y0 + 0.01, y1: pole.y0 + 0.01 + h };
        if boxes.iter().any(|b| b.overlaps(&r) && *b != pole) {
            continue;
        }
        boxes.push(r);
        scene.things.push(Thing {
            kind: ThingKind::TrafficLight,
            parts: vec![(r, jitter(&mut rng, [0.12, 0.12, 0.08], 0.03))],
            lamps: vec![((r.x0 + r.x1) / 2.0, r.y0 + 0.25 * (r.y1 - r.y0))],
            scale: s,
        });
    }

    for _ in 0..counts[2] {
        for _ in 0..30 {
            let t = rng.random_range(0.2..1.0);
            let v = horizon + t * (1.0 - horizon);
            let (l, r) = scene.road_span(v).expect("below horizon");
            let cw = 0.26 * t;
            if r - l < cw * 1.05 {
                continue;
            }
            let x = rng.random_range(l + cw / 2.0..=r - cw / 2.0);
            let ch = cw;
            let body = Rect { x0: x - cw / 2.0, x1: x + cw / 2.0, y0: v - 0.6 * ch, y1: v };
            let cabin = Rect { x0: x - 0.32 * cw, x1: x + 0.32 * cw, y0: v - ch, y1: v - 0.6 * ch };
            let bbox = body.union(&cabin);
            if boxes.iter().any(|b| b.overlaps(&bbox)) {
                continue;
            }
            boxes.push(bbox);
            let base = CAR_COLORS[rng.random_range(0..CAR_COLORS.len())];
            let color = jitter(&mut rng, base, 0.04);
            let glass = jitter(&mut rng, [0.2, 0.25, 0.3], 0.03);
            scene.things.push(Thing {
                kind: ThingKind::Car,
                parts: vec![(body, color), (cabin, glass)],
                lamps: vec![(x - 0.36 * cw, v - 0.3 * ch), (x + 0.36 * cw, v - 0.3 * ch)],
                scale: t,
            });
            break;
        }
    }

    for _ in 0..counts[3] {
        for _ in 0..30 {
            let t = rng.random_range(0.25..1.0);
            let Some((v, x, s, _)) = place_on_sidewalk(&scene, t, &mut rng) else { continue };
            let h = 0.34 * s;
            let w = 0.045 * s;
            let body = Rect { x0: x - w / 2.0, x1: x + w / 2.0, y0: v - 0.8 * h, y1: v };
            let head = Rect { x0: x - 0.3 * w, x1: x + 0.3 * w, y0: v - h, y1: v - 0.8 * h };
            let bbox = body.union(&head);
            if boxes.iter().any(|b| b.overlaps(&bbox)) {
                continue;
            }
            boxes.push(bbox);
            let base = CLOTHES[rng.random_range(0..CLOTHES.len())];
            let clothes = jitter(&mut rng, base, 0.05);
            let skin = jitter(&mut rng, [0.8, 0.62, 0.5], 0.08);
            scene.things.push(Thing {
                kind: ThingKind::Person,
                parts: vec![(body, clothes), (head, skin)],
                lamps: Vec::new(),
                scale: s,
            });
            break;
        }
    }
    Ok(scene)
}

/// A random point on either sidewalk strip at depth `t`: `(v, x, scale,
/// on_left)`.
fn place_on_sidewalk(scene: &SceneGraph, t: f64, rng: &mut impl Rng) -> Option<(f64, f64, f64, bool)> {
    let v = scene.horizon + t * (1.0 - scene.horizon);
    let (rl, rr) = scene.road_span(v)?;
    let (sl, sr) = scene.sidewalk_span(v)?;
    let left = rng.random_bool(0.5);
    let (a, b) = if left { (sl.max(0.01), rl) } else { (rr, sr.min(0.99)) };
    let margin = 0.01;
    if b - a < 3.0 * margin {
        return None;
    }
    Some((v, rng.random_range(a + margin..b - margin), t, left))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_deterministic() {
        let cat = ClassCatalog::desk();
        let a = compose_scene(11, &cat, &SceneConfig::default()).unwrap();
        assert_eq!(a, compose_scene(11, &cat, &SceneConfig::default()).unwrap());
        assert_ne!(a, compose_scene(12, &cat, &SceneConfig::default()).unwrap());
    }

    #[test]
    fn things_do_not_overlap_except_lights_on_poles() {
        let cat = ClassCatalog::desk();
        for seed in 0..200 {
            let s = compose_scene(seed, &cat, &SceneConfig::default()).unwrap();
            for (i, a) in s.things.iter().enumerate() {
                for b in &s.things[i + 1..] {
                    let lamp_on_pole = a.kind == ThingKind::Pole && b.kind == ThingKind::TrafficLight;
                    if !lamp_on_pole {
                        assert!(!a.bbox().overlaps(&b.bbox()), "seed {seed}");
                    }
                }
            }
        }
    }

    #[test]
    fn stuff_only_config_has_no_things() {
        let s = compose_scene(3, &ClassCatalog::desk(), &SceneConfig::stuff_only()).unwrap();
        assert!(s.things.is_empty());
    }

    #[test]
    fn catalog_without_scene_classes_is_rejected() {
        let cat = ClassCatalog::from_json(
            r#"{"void_id":255,"classes":[{"id":0,"name":"a","is_thing":false,"is_eval":true},{"id":1,"name":"b","is_thing":true,"is_eval":true}]}"#,
        )
        .unwrap();
        assert!(compose_scene(1, &cat, &SceneConfig::default()).is_err());
    }
}
