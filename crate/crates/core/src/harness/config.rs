use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::learner::TrainConfig;
use crate::nightshift::{GanConfig, NightParams};
use crate::scenegen::SceneConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneCounts {
    pub train: usize,
    pub val: usize,
}

impl Default for SceneCounts {
    fn default() -> Self {
        SceneCounts { train: 100, val: 40 }
    }
}

/// Where converted night images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslatorSource {
    /// The fixed `night` transform of the config.
    Parametric,
    /// A trained translator checkpoint.
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversionConfig {
    /// Share of the training set that is converted.
    pub fraction: f64,
    /// Share of the validation set that is converted.
    pub val_fraction: f64,
    pub translator: TranslatorSource,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        ConversionConfig {
            fraction: 0.28,
            val_fraction: 1.0,
            translator: TranslatorSource::Parametric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainMode {
    Scratch,
    FromBaseline,
}

/// One group of rendered night scenes feeding the translator mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NightSource {
    pub name: String,
    /// Index into the built-in night lighting variants.
    pub variant: usize,
    /// Scenes rendered for this source.
    pub available: usize,
    /// Scenes drawn from it into the mix.
    pub count: usize,
}

/// A refinement stage: continue training on a freshly converted copy of
/// the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub name: String,
    pub iterations: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Approach2Config {
    pub sources: Vec<NightSource>,
    pub translator: GanConfig,
    pub stages: Vec<StageConfig>,
    /// Learning rate of the refinement stages; unset keeps the segmenter's.
    pub lr_base: Option<f64>,
}

impl Default for Approach2Config {
    fn default() -> Self {
        let sources = [("streets", 30, 24), ("dim", 30, 24), ("sodium", 12, 6), ("soft", 12, 6)]
            .iter()
            .enumerate()
            .map(|(variant, &(name, available, count))| NightSource {
                name: name.into(),
                variant,
                available,
                count,
            })
            .collect();
        Approach2Config {
            sources,
            translator: GanConfig::desk(),
            stages: vec![
                StageConfig {
                    name: "Refined-1".into(),
                    iterations: 700,
                    fraction: 0.28,
                },
                StageConfig {
                    name: "Refined-2".into(),
                    iterations: 1300,
                    fraction: 0.28,
                },
            ],
            lr_base: None,
        }
    }
}

/// Everything that determines an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// `desk`, `cityscapes` or a catalog JSON path.
    pub catalog: String,
    pub scenes: SceneCounts,
    pub scene: SceneConfig,
    /// Stand-in for the pretrained day-to-night translator.
    pub night: NightParams,
    pub conversion: ConversionConfig,
    pub segmenter: TrainConfig,
    pub retrain: RetrainMode,
    /// Unset means the defaults rescaled to the image size.
    pub fusion: Option<FusionParams>,
    pub approach2: Approach2Config,
    /// Output directory; the command line can override it.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 11,
            width: 128,
            height: 64,
            catalog: "desk".into(),
            scenes: SceneCounts::default(),
            scene: SceneConfig::default(),
            night: NightParams {
                gain: 0.35,
                gamma: 1.6,
                contrast: 0.2,
                noise_sigma: 0.02,
                blur_radius: 0,
                lights: Vec::new(),
                seed: 5,
            },
            conversion: ConversionConfig::default(),
            segmenter: TrainConfig::default(),
            retrain: RetrainMode::Scratch,
            fusion: None,
            approach2: Approach2Config::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Format(format!("experiment config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn fusion_params(&self) -> FusionParams {
        self.fusion.unwrap_or_else(|| FusionParams::for_dims(self.width, self.height))
    }

    pub fn check(&self) -> Result<()> {
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !frac_ok(self.conversion.fraction) || !frac_ok(self.conversion.val_fraction) {
            return Err(Error::Validation("conversion fractions must be in [0, 1]".into()));
        }
        if let Some(s) = self.approach2.stages.iter().find(|s| !frac_ok(s.fraction)) {
            return Err(Error::Validation(format!("stage {} has fraction outside [0, 1]", s.name)));
        }
        if let Some(s) = self.approach2.sources.iter().find(|s| s.count > s.available) {
            return Err(Error::Validation(format!(
                "night source {} draws {} of {} scenes",
                s.name, s.count, s.available
            )));
        }
        if self.scenes.train == 0 || self.scenes.val == 0 {
            return Err(Error::Validation("train and val scene counts must be positive".into()));
        }
        if let Some(lr) = self.approach2.lr_base {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Validation("approach2.lr_base must be non-negative".into()));
            }
        }
        self.night.check()?;
        self.segmenter.check()?;
        self.approach2.translator.check()?;
        self.fusion_params().check()?;
        Ok(())
    }
}
