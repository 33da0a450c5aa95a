//! Binary segmenter checkpoints: magic, version, catalog hash, shapes,
//! parameters and optimizer state, all little endian.

use std::path::Path;

use super::model::{SegModel, BLOCK_NAMES};
use super::optim::{AdamHyper, OptimState, ParamSet};
use crate::error::{Error, Result};
use crate::panoptic::ClassCatalog;

const MAGIC: &[u8; 8] = b"NOCTSEG1";
const VERSION: u32 = 1;

pub fn to_bytes(model: &SegModel, state: &OptimState, catalog: &ClassCatalog) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let fp = catalog.fingerprint();
    out.extend_from_slice(&(fp.len() as u32).to_le_bytes());
    out.extend_from_slice(fp.as_bytes());
    for v in [model.hidden, model.n_classes, model.radius] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.offset_scale.to_le_bytes());
    for set in [&model.params, &state.m, &state.v] {
        for b in &set.blocks {
            out.extend_from_slice(&(b.data.len() as u64).to_le_bytes());
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&state.step.to_le_bytes());
    let h = state.hyper;
    for v in [h.lr_base, h.beta1, h.beta2, h.eps] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a checkpoint, rejecting one written for a different catalog.
pub fn from_bytes(buf: &[u8], catalog: &ClassCatalog) -> Result<(SegModel, OptimState)> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a segmenter checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = r.u32()? as usize;
    let fp = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::Format("bad catalog hash".into()))?;
    if fp != catalog.fingerprint() {
        return Err(Error::Input("checkpoint was trained with a different class catalog".into()));
    }
    let hidden = r.u32()? as usize;
    let n_classes = r.u32()? as usize;
    let radius = r.u32()? as usize;
    let offset_scale = r.f64()?;
    let mut sets = Vec::new();
    for _ in 0..3 {
        let mut set = ParamSet::default();
        for name in BLOCK_NAMES {
            let len = r.u64()? as usize;
            if len > buf.len() / 8 {
                return Err(Error::Format("checkpoint block length is implausible".into()));
            }
            let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            set.push(name, data);
        }
        sets.push(set);
    }
    let step = r.u64()?;
    let hyper = AdamHyper {
        lr_base: r.f64()?,
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
    };
    if r.pos != buf.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let v = sets.pop().unwrap();
    let m = sets.pop().unwrap();
    let params = sets.pop().unwrap();
    let model = SegModel {
        hidden,
        n_classes,
        radius,
        offset_scale,
        params,
    };
    model.check()?;
    let state = OptimState { m, v, step, hyper };
    if state.m.blocks.iter().zip(&model.params.blocks).any(|(a, b)| a.data.len() != b.data.len())
        || state.v.blocks.iter().zip(&model.params.blocks).any(|(a, b)| a.data.len() != b.data.len())
    {
        return Err(Error::Format("optimizer moments do not match parameters".into()));
    }
    Ok((model, state))
}

/// Writes the checkpoint and returns its sha256.
pub fn save(path: &Path, model: &SegModel, state: &OptimState, catalog: &ClassCatalog) -> Result<String> {
    let bytes = to_bytes(model, state, catalog);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(crate::hash::sha256_hex(&bytes))
}

pub fn load(path: &Path, catalog: &ClassCatalog) -> Result<(SegModel, OptimState)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_catalog_check() {
        let cat = ClassCatalog::desk();
        let m = SegModel::init(5, cat.len(), 2, 10.0, &mut crate::rng::seeded(1));
        let mut s = OptimState::new(&m.params, AdamHyper::default());
        s.step = 17;
        s.m.blocks[2].data[3] = 0.25;
        let bytes = to_bytes(&m, &s, &cat);
        let (m2, s2) = from_bytes(&bytes, &cat).unwrap();
        assert_eq!((m, s), (m2, s2));
        assert!(matches!(from_bytes(&bytes, &ClassCatalog::cityscapes()), Err(Error::Input(_))));
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 1], &cat), Err(Error::Format(_))));
        assert!(matches!(from_bytes(b"garbage!", &cat), Err(Error::Format(_))));
    }
}
