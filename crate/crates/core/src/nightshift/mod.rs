//! Day to night domain translation: a fixed parametric night transform, a
//! small cycle-consistent adversarial translator, and dataset conversion.

mod convert;
mod gan;
mod params;
mod stats;
mod translator;

pub use convert::{convert_subset, select_subset, subset_size, Converter};
pub use gan::{
    gan_losses, gan_step, train_translator, train_translator_images, EpochRecord, GanConfig, GanGrads, GanLosses,
    GanLoss, TranslatorOutcome,
};
pub use params::{night_transform, Light, NightParams};
pub use stats::{image_stats, ImageStats, HIST_BINS};
pub use translator::{disc_features, translate, TranslatorPair, DISC_FEATURES, GEN_PARAMS};
