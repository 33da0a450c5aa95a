//! 3-channel panoptic id codec: `id = R + 256·G + 65536·B`, id 0 is void.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::catalog::{ClassCatalog, ClassId};
use super::image::ImageBuffer;
use super::label::LabelMap;
use super::validate::validate;

/// Sidecar record for one encoded segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMeta {
    pub id: u32,
    pub class_id: ClassId,
    pub area: u64,
    /// `[x, y, w, h]`
    pub bbox: [u32; 4],
    /// Instance confidence for predicted thing segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f32>,
}

pub fn id_to_rgb(id: u32) -> [u8; 3] {
    [(id & 0xff) as u8, ((id >> 8) & 0xff) as u8, ((id >> 16) & 0xff) as u8]
}

pub fn rgb_to_id(rgb: [u8; 3]) -> u32 {
    rgb[0] as u32 + 256 * rgb[1] as u32 + 65536 * rgb[2] as u32
}

#[inline]
fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Encodes a valid label map. Segment ids are assigned 1, 2, … in order of
/// first occurrence in a row-major scan; void pixels get id 0.
pub fn encode_panoptic(map: &LabelMap, catalog: &ClassCatalog) -> Result<(ImageBuffer, Vec<SegmentMeta>)> {
    let report = validate(map, catalog);
    if let Some(v) = report.first() {
        return Err(Error::Validation(format!(
            "cannot encode invalid label map: {v} ({} violations)",
            report.violations.len()
        )));
    }
    let void = catalog.void_id();
    let order = map.segments_in_scan_order(void);
    if order.len() >= 1 << 24 {
        return Err(Error::Input("more than 2^24 - 1 segments".into()));
    }
    let ids: HashMap<_, u32> = order.iter().enumerate().map(|(i, k)| (*k, i as u32 + 1)).collect();

    let (w, h) = (map.width(), map.height());
    let mut data = vec![0.0f32; w * h * 3];
    // (area, min_x, min_y, max_x, max_y)
    let mut stats: Vec<(u64, usize, usize, usize, usize)> = vec![(0, usize::MAX, usize::MAX, 0, 0); order.len()];
    for i in 0..map.len() {
        let key = map.key(i);
        if key.0 == void {
            continue;
        }
        let id = ids[&key];
        let rgb = id_to_rgb(id);
        for c in 0..3 {
            data[i * 3 + c] = rgb[c] as f32 / 255.0;
        }
        let (x, y) = (i % w, i / w);
        let s = &mut stats[id as usize - 1];
        s.0 += 1;
        s.1 = s.1.min(x);
        s.2 = s.2.min(y);
        s.3 = s.3.max(x);
        s.4 = s.4.max(y);
    }
    let meta = order
        .iter()
        .zip(&stats)
        .enumerate()
        .map(|(i, (key, s))| SegmentMeta {
            id: i as u32 + 1,
            class_id: key.0,
            area: s.0,
            bbox: [s.1 as u32, s.2 as u32, (s.3 - s.1 + 1) as u32, (s.4 - s.2 + 1) as u32],
            score: None,
        })
        .collect();
    let img = ImageBuffer::from_vec(w, h, data).expect("encoded channels are in range");
    Ok((img, meta))
}

/// Reads the per-pixel segment ids out of an encoded image.
pub(crate) fn decode_ids(img: &ImageBuffer) -> Vec<u32> {
    img.pixels()
        .map(|p| rgb_to_id([quantize(p[0]), quantize(p[1]), quantize(p[2])]))
        .collect()
}

/// Inverse of [`encode_panoptic`]. Instance ids come out dense per class,
/// starting at 1, in ascending segment id order.
pub fn decode_panoptic(img: &ImageBuffer, meta: &[SegmentMeta], catalog: &ClassCatalog) -> Result<LabelMap> {
    decode_ids_with_meta(&decode_ids(img), img.width(), img.height(), meta, catalog)
}

pub(crate) fn decode_ids_with_meta(
    ids: &[u32],
    width: usize,
    height: usize,
    meta: &[SegmentMeta],
    catalog: &ClassCatalog,
) -> Result<LabelMap> {
    let mut by_id: BTreeMap<u32, &SegmentMeta> = BTreeMap::new();
    for m in meta {
        if m.id == 0 {
            return Err(Error::Format("segment id 0 is reserved for void".into()));
        }
        if !catalog.contains(m.class_id) {
            return Err(Error::Format(format!("segment {} has unknown class {}", m.id, m.class_id)));
        }
        if by_id.insert(m.id, m).is_some() {
            return Err(Error::Format(format!("segment id {} listed twice", m.id)));
        }
    }

    let mut areas: BTreeMap<u32, u64> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        if id == 0 {
            continue;
        }
        if !by_id.contains_key(&id) {
            return Err(Error::Format(format!(
                "pixel ({}, {}) carries id {id} which is not in the segment list",
                i % width,
                i / width
            )));
        }
        *areas.entry(id).or_insert(0) += 1;
    }
    for (id, m) in &by_id {
        let found = areas.get(id).copied().unwrap_or(0);
        if found != m.area {
            return Err(Error::Consistency(format!(
                "segment {id} claims area {} but the image has {found} pixels",
                m.area
            )));
        }
    }

    let mut next: BTreeMap<ClassId, u32> = BTreeMap::new();
    let mut resolved: BTreeMap<u32, (ClassId, u32)> = BTreeMap::new();
    for (id, m) in &by_id {
        let inst = if catalog.is_thing(m.class_id) {
            let n = next.entry(m.class_id).or_insert(0);
            *n += 1;
            *n
        } else {
            0
        };
        resolved.insert(*id, (m.class_id, inst));
    }

    let void = catalog.void_id();
    let mut sem = vec![void; ids.len()];
    let mut inst = vec![0; ids.len()];
    for (i, &id) in ids.iter().enumerate() {
        if id != 0 {
            let (s, n) = resolved[&id];
            sem[i] = s;
            inst[i] = n;
        }
    }
    LabelMap::from_parts(width, height, sem, inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_300_splits_into_44_1_0() {
        assert_eq!(id_to_rgb(300), [44, 1, 0]);
        assert_eq!(rgb_to_id([44, 1, 0]), 300);
    }

    #[test]
    fn all_void_encodes_to_zeros() {
        let cat = ClassCatalog::desk();
        let map = LabelMap::void(5, 4, cat.void_id());
        let (img, meta) = encode_panoptic(&map, &cat).unwrap();
        assert!(meta.is_empty());
        assert!(img.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(decode_panoptic(&img, &meta, &cat).unwrap(), map);
    }

    #[test]
    fn hand_decoded_two_by_two() {
        let cat = ClassCatalog::desk();
        let road = cat.id_of("road").unwrap();
        let car = cat.id_of("car").unwrap();
        let img = ImageBuffer::from_fn(2, 2, |x, y| {
            let id = [5u32, 5, 7, 0][y * 2 + x];
            let c = id_to_rgb(id);
            [c[0] as f32 / 255.0, c[1] as f32 / 255.0, c[2] as f32 / 255.0]
        });
        let meta = vec![
            SegmentMeta { id: 5, class_id: road, area: 2, bbox: [0, 0, 2, 1], score: None },
            SegmentMeta { id: 7, class_id: car, area: 1, bbox: [0, 1, 1, 1], score: None },
        ];
        let map = decode_panoptic(&img, &meta, &cat).unwrap();
        assert_eq!(map.sem(), &[road, road, car, cat.void_id()]);
        assert_eq!(map.inst(), &[0, 0, 1, 0]);
    }

    #[test]
    fn area_mismatch_is_a_consistency_error() {
        let cat = ClassCatalog::desk();
        let c = id_to_rgb(3);
        let px = [c[0] as f32 / 255.0, c[1] as f32 / 255.0, c[2] as f32 / 255.0];
        let img = ImageBuffer::from_fn(3, 3, |_, _| px);
        let meta = vec![SegmentMeta { id: 3, class_id: 0, area: 10, bbox: [0, 0, 3, 3], score: None }];
        assert!(matches!(decode_panoptic(&img, &meta, &cat), Err(Error::Consistency(_))));
    }

    #[test]
    fn unknown_id_is_a_format_error() {
        let cat = ClassCatalog::desk();
        let img = ImageBuffer::filled(1, 1, [1.0 / 255.0, 0.0, 0.0]);
        assert!(matches!(decode_panoptic(&img, &[], &cat), Err(Error::Format(_))));
    }

    #[test]
    fn encode_rejects_invalid_map_with_coordinates() {
        let cat = ClassCatalog::desk();
        let sky = cat.id_of("sky").unwrap();
        let map = LabelMap::from_parts(2, 2, vec![0, 0, 0, sky], vec![0, 0, 0, 3]).unwrap();
        let err = encode_panoptic(&map, &cat).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("(1, 1)"), "{err}");
    }

    #[test]
    fn meta_records_area_and_bbox() {
        let cat = ClassCatalog::desk();
        let car = cat.id_of("car").unwrap();
        let map = LabelMap::from_parts(3, 2, vec![0, car, car, 0, 0, car], vec![0, 1, 1, 0, 0, 1]).unwrap();
        let (_, meta) = encode_panoptic(&map, &cat).unwrap();
        assert_eq!(meta.len(), 2);
        assert_eq!((meta[0].class_id, meta[0].area, meta[0].bbox), (0, 3, [0, 0, 2, 2]));
        assert_eq!((meta[1].class_id, meta[1].area, meta[1].bbox), (car, 3, [1, 0, 2, 2]));
    }
}
