//! A tiny trainable per-pixel segmenter with semantic, center and offset
//! heads, plus the training machinery around it: targets, losses with
//! hand-derived gradients, Adam and learning-rate schedules.

pub mod checkpoint;
mod features;
mod losses;
mod model;
mod optim;
mod schedule;
mod targets;
mod train;

pub use features::{featurize, Features, FEATURE_DIM};
pub use losses::{loss_and_grad, losses, LossBreakdown, LossWeights, MiningParams};
pub use model::{forward, ForwardPass, SegModel};
pub(crate) use model::sigmoid;
pub use optim::{adam_step, AdamHyper, OptimState, ParamBlock, ParamSet};
pub use schedule::{lr_at, Schedule};
pub use targets::{make_targets, TargetParams, Targets};
pub use train::{
    load_samples, predict, train_on_samples, train_segmenter, LossRecord, TrainConfig, TrainOutcome, TrainSample,
};
