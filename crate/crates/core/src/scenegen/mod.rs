//! Procedural street scenes with exact panoptic ground truth, rendered in
//! day or night lighting, and assembly of mixed datasets.

mod lighting;
mod mix;
mod render;
mod scene;

pub use lighting::{LightingSpec, Style};
pub use mix::{build_mix, generate_dataset, GenerateSpec, MixSpec};
pub use render::{render, scene_lights};
pub use scene::{compose_scene, Block, Blob, Rect, SceneConfig, SceneGraph, Thing, ThingKind};
