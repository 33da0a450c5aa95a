use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Day,
    Night,
}

/// How a scene is lit. Day style ignores every other field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightingSpec {
    pub style: Style,
    /// Multiplicative exposure of the unlit scene.
    pub ambient: f64,
    pub gamma: f64,
    pub tint: [f64; 3],
    pub contrast: f64,
    /// A glow at the top of every pole.
    pub streetlights: bool,
    /// Chance that a car has its headlights on.
    pub headlight_prob: f64,
    /// A red or green glow on every traffic light.
    pub traffic_lights: bool,
    /// Up to this many lit windows on buildings.
    pub window_lights: usize,
    pub glow_min: f64,
    pub glow_max: f64,
    /// Streetlight glow radius as a fraction of image height.
    pub glow_radius: f64,
    pub noise_sigma: f64,
    pub blur_radius: usize,
    pub seed: u64,
}

impl Default for LightingSpec {
    fn default() -> Self {
        LightingSpec::day()
    }
}

impl LightingSpec {
    pub fn day() -> Self {
        LightingSpec {
            style: Style::Day,
            ambient: 1.0,
            gamma: 1.0,
            tint: [1.0; 3],
            contrast: 0.0,
            streetlights: false,
            headlight_prob: 0.0,
            traffic_lights: false,
            window_lights: 0,
            glow_min: 0.0,
            glow_max: 0.0,
            glow_radius: 0.0,
            noise_sigma: 0.0,
            blur_radius: 0,
            seed: 0,
        }
    }

    pub fn night() -> Self {
        LightingSpec {
            style: Style::Night,
            ambient: 0.3,
            gamma: 1.4,
            tint: [0.9, 0.95, 1.1],
            contrast: 0.1,
            streetlights: true,
            headlight_prob: 0.7,
            traffic_lights: true,
            window_lights: 4,
            glow_min: 0.5,
            glow_max: 0.9,
            glow_radius: 0.06,
            noise_sigma: 0.02,
            blur_radius: 0,
            seed: 0,
        }
    }

    /// Four night looks: default, dim and noisy, sodium orange, soft.
    pub fn night_variant(k: usize) -> Self {
        let base = LightingSpec::night();
        match k % 4 {
            0 => base,
            1 => LightingSpec {
                ambient: 0.2,
                gamma: 1.6,
                tint: [0.85, 0.9, 1.15],
                noise_sigma: 0.035,
                headlight_prob: 0.5,
                ..base
            },
            2 => LightingSpec {
                ambient: 0.35,
                gamma: 1.3,
                tint: [1.1, 0.9, 0.7],
                glow_min: 0.7,
                glow_max: 1.0,
                ..base
            },
            _ => LightingSpec {
                ambient: 0.28,
                gamma: 1.5,
                tint: [0.95, 0.95, 1.05],
                blur_radius: 1,
                noise_sigma: 0.03,
                ..base
            },
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        LightingSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.style == Style::Day {
            return Ok(());
        }
        let ok = self.ambient > 0.0
            && self.ambient <= 1.0
            && self.gamma >= 1.0
            && self.tint.iter().all(|t| t.is_finite() && *t >= 0.0)
            && (0.0..=1.0).contains(&self.contrast)
            && (0.0..=1.0).contains(&self.headlight_prob)
            && self.glow_min >= 0.0
            && self.glow_max >= self.glow_min
            && self.glow_radius >= 0.0
            && self.noise_sigma >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("lighting spec has out-of-range values".into()))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: LightingSpec = toml::from_str(text).map_err(|e| Error::Format(format!("lighting spec: {e}")))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let n = LightingSpec::night_variant(2);
        let text = toml::to_string(&n).unwrap();
        assert_eq!(LightingSpec::from_toml(&text).unwrap(), n);
        assert_eq!(LightingSpec::from_toml("style = \"day\"").unwrap(), LightingSpec::day());
        assert!(LightingSpec::from_toml("style = \"night\"\nambient = 3.0").is_err());
    }
}
