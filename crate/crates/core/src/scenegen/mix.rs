use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lighting::{LightingSpec, Style};
use super::render::render;
use super::scene::{compose_scene, SceneConfig};
use crate::error::{Error, Result};
use crate::panoptic::io::{write_image, write_panoptic};
use crate::panoptic::{ClassCatalog, DatasetEntry, DatasetIndex, Domain, Split};

/// One source of a mixed dataset.
#[derive(Debug, Clone, Copy)]
pub struct MixSpec<'a> {
    pub name: &'a str,
    pub source: &'a DatasetIndex,
    pub count: usize,
}

/// Samples `count` entries without replacement from each source and
/// concatenates them, tagging each with its source name.
pub fn build_mix(specs: &[MixSpec<'_>], seed: u64) -> Result<DatasetIndex> {
    let mut entries = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let n = spec.source.entries.len();
        if spec.count > n {
            return Err(Error::Input(format!(
                "mix source {:?} has {n} entries, {} requested",
                spec.name, spec.count
            )));
        }
        let mut rng = crate::rng::seeded(crate::rng::derive(seed, k as u64));
        let mut picked = rand::seq::index::sample(&mut rng, n, spec.count).into_vec();
        picked.sort_unstable();
        entries.extend(picked.into_iter().map(|i| DatasetEntry {
            source: Some(spec.name.to_string()),
            ..spec.source.entries[i].clone()
        }));
    }
    DatasetIndex::new(seed, entries)
}

/// A batch of rendered scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSpec {
    pub count: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub lighting: LightingSpec,
    pub scene: SceneConfig,
    pub split: Split,
    /// File name prefix and provenance tag.
    pub prefix: String,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            count: 10,
            seed: 0,
            width: 128,
            height: 64,
            lighting: LightingSpec::day(),
            scene: SceneConfig::default(),
            split: Split::Train,
            prefix: "scene".into(),
        }
    }
}

/// Renders `spec.count` scenes into `out_dir` and returns their manifest.
/// Scene `i` uses seed `derive(spec.seed, i)`.
pub fn generate_dataset(spec: &GenerateSpec, catalog: &ClassCatalog, out_dir: &Path) -> Result<DatasetIndex> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let domain = match spec.lighting.style {
        Style::Day => Domain::Day,
        Style::Night => Domain::Night,
    };
    let entries = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let seed = crate::rng::derive(spec.seed, i as u64);
            let scene = compose_scene(seed, catalog, &spec.scene)?;
            let (img, labels) = render(&scene, &spec.lighting, spec.width, spec.height)?;
            let image = out_dir.join(format!("{}_{i:05}.png", spec.prefix));
            let label = out_dir.join(format!("{}_{i:05}_panoptic.png", spec.prefix));
            write_image(&image, &img)?;
            write_panoptic(&label, &labels, catalog, None)?;
            Ok(DatasetEntry {
                image,
                label: Some(label),
                split: spec.split,
                domain,
                source: Some(spec.prefix.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetIndex::new(spec.seed, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn fake(prefix: &str, n: usize) -> DatasetIndex {
        let entries = (0..n)
            .map(|i| DatasetEntry {
                image: PathBuf::from(format!("{prefix}/{i}.png")),
                label: Some(PathBuf::from(format!("{prefix}/{i}_panoptic.png"))),
                split: Split::Train,
                domain: Domain::Night,
                source: None,
            })
            .collect();
        DatasetIndex::new(0, entries).unwrap()
    }

    #[test]
    fn mix_totals() {
        let srcs: Vec<_> = ["a", "b", "c", "d"].iter().map(|p| fake(p, 1600)).collect();
        let mix = |counts: [usize; 4]| {
            let specs: Vec<_> = srcs
                .iter()
                .zip(counts)
                .zip(["a", "b", "c", "d"])
                .map(|((s, count), name)| MixSpec { name, source: s, count })
                .collect();
            build_mix(&specs, 5).unwrap()
        };
        let m1 = mix([1167, 1493, 21, 50]);
        assert_eq!(m1.len(), 2731);
        assert_eq!(m1.entries.iter().filter(|e| e.source.as_deref() == Some("c")).count(), 21);
        assert_eq!(mix([937, 750, 21, 50]).len(), 1758);
        assert_eq!(m1, mix([1167, 1493, 21, 50]));
    }

    #[test]
    fn empty_and_oversized_requests() {
        let s = fake("a", 3);
        let one = |count| build_mix(&[MixSpec { name: "a", source: &s, count }], 1);
        assert!(one(0).unwrap().is_empty());
        assert!(matches!(one(4), Err(Error::Input(_))));
    }
}
