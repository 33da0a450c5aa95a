//! Domain types shared by every other module: class catalogs, label maps,
//! RGB images, the panoptic id codec and dataset manifests.

mod catalog;
mod codec;
pub(crate) mod image;
pub mod io;
mod label;
mod manifest;
mod validate;

pub use catalog::{ClassCatalog, ClassDef, ClassId, DESK_VOID};
pub use codec::{decode_panoptic, encode_panoptic, id_to_rgb, rgb_to_id, SegmentMeta};
pub use image::ImageBuffer;
pub use label::{LabelMap, SegmentKey};
pub use manifest::{DatasetEntry, DatasetIndex, Domain, Split};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};
