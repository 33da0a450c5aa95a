//! Binary heads container.
//!
//! ```text
//! offset  size         field
//! 0       8            magic "NOCTHEAD"
//! 8       4            format version (u32 LE) = 1
//! 12      4            height H (u32 LE)
//! 16      4            width W (u32 LE)
//! 20      4            classes C (u32 LE)
//! 24      4·H·W·C      semantic probabilities, f32 LE, row-major, class fastest
//! …       4·H·W        center heatmap, f32 LE, row-major
//! …       4·H·W·2      offsets (Δy, Δx) per pixel, f32 LE, row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};

use super::heads::HeadOutputs;

pub const MAGIC: &[u8; 8] = b"NOCTHEAD";
pub const VERSION: u32 = 1;

pub fn to_bytes(h: &HeadOutputs) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 4 * (h.sem_probs().len() + h.center().len() + h.offset().len()));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, h.height() as u32, h.width() as u32, h.n_classes() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in h.sem_probs().iter().chain(h.center()).chain(h.offset()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<HeadOutputs> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a heads file (bad magic)".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize;
    let (version, h, w, c) = (word(0) as u32, word(1), word(2), word(3));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported heads version {version}")));
    }
    let n = h * w;
    let expected = 24 + 4 * (n * c + n + 2 * n);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "heads file for {w}x{h}x{c} should have {expected} bytes, has {}",
            bytes.len()
        )));
    }
    let floats: Vec<f32> = bytes[24..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let (sem, rest) = floats.split_at(n * c);
    let (center, offset) = rest.split_at(n);
    HeadOutputs::new(w, h, c, sem.to_vec(), center.to_vec(), offset.to_vec())
}

pub fn write(path: &Path, h: &HeadOutputs) -> Result<()> {
    std::fs::write(path, to_bytes(h)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<HeadOutputs> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let h = HeadOutputs::new(2, 1, 2, vec![0.25, 0.75, 1.0, 0.0], vec![0.5, 0.0], vec![1.0, -2.0, 0.0, 3.5]).unwrap();
        let bytes = to_bytes(&h);
        assert_eq!(bytes.len(), 24 + 4 * 10);
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[24..28], &0.25f32.to_le_bytes());
        assert_eq!(from_bytes(&bytes).unwrap(), h);
        assert!(from_bytes(&bytes[..30]).is_err());
    }
}
