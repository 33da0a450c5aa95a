//! PNG and JSON sidecar files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::catalog::ClassCatalog;
use super::codec::{decode_ids_with_meta, encode_panoptic, rgb_to_id, SegmentMeta};
use super::image::ImageBuffer;
use super::label::{LabelMap, SegmentKey};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn write_rgb8(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

fn read_rgb8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = dec.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(png_err(path, format!("unsupported color type {other:?}"))),
    };
    let mut rgb = Vec::with_capacity(w * h * 3);
    for row in buf.chunks_exact(info.line_size).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            if channels < 3 {
                rgb.extend_from_slice(&[px[0]; 3]);
            } else {
                rgb.extend_from_slice(&px[..3]);
            }
        }
    }
    Ok((w, h, rgb))
}

/// Writes an RGB image as an 8-bit PNG.
pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    write_rgb8(path, img.width(), img.height(), &bytes)
}

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    let (w, h, bytes) = read_rgb8(path)?;
    let data = bytes.into_iter().map(|b| b as f32 / 255.0).collect();
    ImageBuffer::from_vec(w, h, data)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    segments: Vec<SegmentMeta>,
}

/// `foo.png` → `foo.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Writes the panoptic PNG plus its JSON sidecar. `scores` attaches
/// confidences to thing segments (predictions); ground truth passes `None`.
pub fn write_panoptic(
    path: &Path,
    map: &LabelMap,
    catalog: &ClassCatalog,
    scores: Option<&BTreeMap<SegmentKey, f32>>,
) -> Result<Vec<SegmentMeta>> {
    let (img, mut meta) = encode_panoptic(map, catalog)?;
    if let Some(scores) = scores {
        let order = map.segments_in_scan_order(catalog.void_id());
        for (m, key) in meta.iter_mut().zip(order) {
            m.score = scores.get(&key).copied();
        }
    }
    write_image(path, &img)?;
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&Sidecar { segments: meta.clone() })?;
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    Ok(meta)
}

/// Reads a panoptic PNG + sidecar. Returns the label map and the scores of
/// any segments that carry one, keyed by the decoded segment key.
pub fn read_panoptic(path: &Path, catalog: &ClassCatalog) -> Result<(LabelMap, BTreeMap<SegmentKey, f32>)> {
    let (w, h, bytes) = read_rgb8(path)?;
    let ids: Vec<u32> = bytes.chunks_exact(3).map(|p| rgb_to_id([p[0], p[1], p[2]])).collect();
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let map = decode_ids_with_meta(&ids, w, h, &sidecar.segments, catalog)?;

    let mut scores = BTreeMap::new();
    let mut by_id: BTreeMap<u32, Option<f32>> = BTreeMap::new();
    for m in &sidecar.segments {
        by_id.insert(m.id, m.score);
    }
    for (i, &id) in ids.iter().enumerate() {
        if let Some(Some(s)) = by_id.get(&id) {
            scores.entry(map.key(i)).or_insert(*s);
        }
    }
    Ok((map, scores))
}
