use serde::{Deserialize, Serialize};

use crate::panoptic::ImageBuffer;

pub const HIST_BINS: usize = 24;

/// Luminance summary of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub mean: f64,
    pub std: f64,
    pub histogram: [u64; HIST_BINS],
    /// Pixels with luminance above 0.9.
    pub bright_spots: u64,
}

pub fn image_stats(img: &ImageBuffer) -> ImageStats {
    let mut histogram = [0u64; HIST_BINS];
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut bright_spots = 0;
    let mut n = 0u64;
    for px in img.pixels() {
        let l = crate::panoptic::image::luma(px) as f64;
        sum += l;
        sq += l * l;
        n += 1;
        histogram[((l * HIST_BINS as f64) as usize).min(HIST_BINS - 1)] += 1;
        if l > 0.9 {
            bright_spots += 1;
        }
    }
    let (mean, std) = if n == 0 {
        (0.0, 0.0)
    } else {
        let m = sum / n as f64;
        (m, (sq / n as f64 - m * m).max(0.0).sqrt())
    };
    ImageStats {
        mean,
        std,
        histogram,
        bright_spots,
    }
}
