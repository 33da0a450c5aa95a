//! Panoptic segmentation under low illumination, at desk scale.
//!
//! The crate is organised the way the experiment flows:
//!
//! - [`panoptic`]: catalogs, label maps, images, the 3-channel panoptic codec
//!   and dataset manifests.
//! - [`metrics`]: PQ/SQ/RQ with unique matching, semantic metrics (mIoU, fwIoU,
//!   mACC, pACC), mask AP, order-independent aggregation and delta reports.
//! - [`fusion`]: center non-maximum suppression, offset grouping and
//!   majority-vote fusion of the three head outputs.
//! - [`learner`]: a tiny per-pixel three-head segmenter, its losses, Adam and
//!   the learning-rate schedules.
//! - [`nightshift`]: the parametric night transform, a cycle-consistent toy
//!   translator and dataset conversion.
//! - [`scenegen`]: procedural street scenes with exact panoptic ground truth.
//! - [`harness`]: the baseline / retrained / refined experiment protocols and
//!   their table reports.
//!
//! ```
//! use noctis::panoptic::ClassCatalog;
//! use noctis::scenegen::{compose_scene, render, LightingSpec, SceneConfig};
//! use noctis::metrics::evaluate_pair;
//!
//! let catalog = ClassCatalog::desk();
//! let scene = compose_scene(7, &catalog, &SceneConfig::default()).unwrap();
//! let (_image, labels) = render(&scene, &LightingSpec::day(), 128, 64).unwrap();
//! let report = evaluate_pair(&labels, &labels, &catalog).unwrap();
//! assert_eq!(report.pq.all, Some(100.0));
//! ```

#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod error;
pub mod fusion;
pub mod harness;
pub mod learner;
pub mod metrics;
pub mod nightshift;
pub mod panoptic;
pub mod scenegen;

mod hash;
mod rng;

pub use error::{Error, Result};
