use std::path::Path;

use rayon::prelude::*;

use super::params::{night_transform, NightParams};
use super::translator::{translate, TranslatorPair};
use crate::error::{Error, Result};
use crate::panoptic::io::{read_image, write_image};
use crate::panoptic::{DatasetEntry, DatasetIndex, Domain, ImageBuffer};

/// What turns a day image into a night one.
#[derive(Debug, Clone)]
pub enum Converter {
    Params(NightParams),
    Translator(TranslatorPair),
}

impl Converter {
    /// `key` reseeds the transform noise so that images do not share one
    /// noise pattern.
    pub fn apply(&self, img: &ImageBuffer, key: u64) -> ImageBuffer {
        match self {
            Converter::Params(p) => night_transform(img, &p.with_seed(crate::rng::derive(p.seed, key))),
            Converter::Translator(pair) => translate(img, pair),
        }
    }
}

/// `round(n · fraction)`.
pub fn subset_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).min(n)
}

/// Sorted indexes of a seeded uniform sample without replacement.
pub fn select_subset(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Validation(format!("fraction must be in [0, 1], got {fraction}")));
    }
    let k = subset_size(n, fraction);
    let mut rng = crate::rng::seeded(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Replaces the images of a seeded `fraction` of `train` by converted
/// copies written to `out_dir`. Labels of converted entries are kept
/// verbatim and their domain becomes `Converted`.
pub fn convert_subset(
    train: &DatasetIndex,
    fraction: f64,
    seed: u64,
    converter: &Converter,
    out_dir: &Path,
) -> Result<DatasetIndex> {
    let picked = select_subset(train.entries.len(), fraction, seed)?;
    if !picked.is_empty() {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }
    let converted: Vec<(usize, DatasetEntry)> = picked
        .par_iter()
        .map(|&i| {
            let e = &train.entries[i];
            let img = read_image(&e.image)?;
            let night = converter.apply(&img, i as u64);
            let stem = e.image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let path = out_dir.join(format!("{i:05}_{stem}_converted.png"));
            write_image(&path, &night)?;
            Ok((
                i,
                DatasetEntry {
                    image: path,
                    domain: Domain::Converted,
                    ..e.clone()
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut entries = train.entries.clone();
    for (i, e) in converted {
        entries[i] = e;
    }
    DatasetIndex::new(train.seed, entries)
}
