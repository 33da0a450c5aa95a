//! Panoptic-DeepLab style post-processing.
//!
//! Three per-pixel head outputs (semantic probabilities, a center heatmap
//! and an offset field) become a panoptic [`LabelMap`]:
//!
//! 1. [`find_centers`]: keep pixels that are the maximum of their
//!    `kernel × kernel` window and reach the threshold, then the `top_k`
//!    strongest.
//! 2. [`group_instances`]: every thing pixel votes for the center nearest to
//!    where its offset points.
//! 3. [`fuse`]: each instance takes the majority semantic class of its
//!    pixels; everything else takes its best stuff class, and stuff classes
//!    covering less than `stuff_area_min` pixels become void.
//!
//! [`LabelMap`]: crate::panoptic::LabelMap

mod centers;
mod fuse;
mod grouping;
mod heads;
pub mod heads_io;

pub use centers::{find_centers, Center};
pub use fuse::{fuse, fuse_from_heads, Panoptic};
pub use grouping::group_instances;
pub use heads::{oracle_heads, FusionParams, HeadOutputs};
