use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::catalog::{ClassCatalog, ClassId};

/// A panoptic segment is identified by its class and its instance id
/// (instance 0 for stuff).
pub type SegmentKey = (ClassId, u32);

/// Per-pixel semantic class and instance id, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    sem: Vec<ClassId>,
    inst: Vec<u32>,
}

impl LabelMap {
    /// All-void map.
    pub fn void(width: usize, height: usize, void_id: ClassId) -> Self {
        LabelMap {
            width,
            height,
            sem: vec![void_id; width * height],
            inst: vec![0; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, sem: Vec<ClassId>, inst: Vec<u32>) -> Result<Self> {
        if sem.len() != width * height || inst.len() != width * height {
            return Err(Error::Input(format!(
                "label map {width}x{height} needs {} pixels, got sem={} inst={}",
                width * height,
                sem.len(),
                inst.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            sem,
            inst,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.sem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sem.is_empty()
    }

    pub fn sem(&self) -> &[ClassId] {
        &self.sem
    }

    pub fn inst(&self) -> &[u32] {
        &self.inst
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> SegmentKey {
        let i = y * self.width + x;
        (self.sem[i], self.inst[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, class: ClassId, instance: u32) {
        let i = y * self.width + x;
        self.sem[i] = class;
        self.inst[i] = instance;
    }

    #[inline]
    pub fn key(&self, i: usize) -> SegmentKey {
        (self.sem[i], self.inst[i])
    }

    pub fn same_dims(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixel count per non-void segment.
    pub fn segment_areas(&self, void_id: ClassId) -> BTreeMap<SegmentKey, u64> {
        let mut areas = BTreeMap::new();
        for (&s, &i) in self.sem.iter().zip(&self.inst) {
            if s != void_id {
                *areas.entry((s, i)).or_insert(0) += 1;
            }
        }
        areas
    }

    /// Non-void segments in order of first occurrence in a row-major scan.
    pub fn segments_in_scan_order(&self, void_id: ClassId) -> Vec<SegmentKey> {
        let mut seen = std::collections::HashSet::new();
        let mut order = Vec::new();
        for i in 0..self.len() {
            let key = self.key(i);
            if key.0 != void_id && seen.insert(key) {
                order.push(key);
            }
        }
        order
    }

    /// Renumbers instance ids densely per class, starting at 1, in order of
    /// first occurrence. Stuff and void pixels get instance 0.
    pub fn canonicalize(&self, catalog: &ClassCatalog) -> LabelMap {
        let mut remap: BTreeMap<SegmentKey, u32> = BTreeMap::new();
        let mut next: BTreeMap<ClassId, u32> = BTreeMap::new();
        let mut inst = vec![0; self.len()];
        for (i, out) in inst.iter_mut().enumerate() {
            let (s, id) = self.key(i);
            if !catalog.is_thing(s) || id == 0 {
                continue;
            }
            *out = *remap.entry((s, id)).or_insert_with(|| {
                let n = next.entry(s).or_insert(0);
                *n += 1;
                *n
            });
        }
        LabelMap {
            width: self.width,
            height: self.height,
            sem: self.sem.clone(),
            inst,
        }
    }

    /// Applies the same pixel permutation to both channels: pixel `i` of the
    /// result is pixel `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            sem: perm.iter().map(|&p| self.sem[p]).collect(),
            inst: perm.iter().map(|&p| self.inst[p]).collect(),
        }
    }
}
