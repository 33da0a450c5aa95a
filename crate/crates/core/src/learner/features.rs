use crate::panoptic::ImageBuffer;

/// RGB, window mean and std per channel, normalised (x, y).
pub const FEATURE_DIM: usize = 11;

/// Per-pixel feature matrix, row-major over pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }
}

/// Window statistics read edge-replicated pixels outside the image.
pub fn featurize(img: &ImageBuffer, radius: usize) -> Features {
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;
    let count = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let px = img.as_slice();
    let mut data = vec![0.0; w * h * FEATURE_DIM];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let f = &mut data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            let mut sum = [0.0f64; 3];
            let mut sq = [0.0f64; 3];
            for dy in -r..=r {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let j = 3 * (yy * w + xx);
                    for c in 0..3 {
                        let v = px[j + c] as f64;
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                }
            }
            for c in 0..3 {
                f[c] = px[3 * i + c] as f64;
                let mean = sum[c] / count;
                f[3 + c] = mean;
                f[6 + c] = (sq[c] / count - mean * mean).max(0.0).sqrt();
            }
            f[9] = if w > 1 { x as f64 / (w - 1) as f64 } else { 0.0 };
            f[10] = if h > 1 { y as f64 / (h - 1) as f64 } else { 0.0 };
        }
    }
    Features { width: w, height: h, data }
}
