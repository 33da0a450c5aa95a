use super::heads::FusionParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub y: usize,
    pub x: usize,
    pub score: f32,
}

/// Sliding-window maximum with the window clipped at the borders, computed
/// as a row pass followed by a column pass.
fn window_max(heat: &[f32], width: usize, height: usize, radius: usize) -> Vec<f32> {
    let mut rows = vec![0.0f32; heat.len()];
    for y in 0..height {
        let row = &heat[y * width..(y + 1) * width];
        for x in 0..width {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(width - 1);
            rows[y * width + x] = row[lo..=hi].iter().copied().fold(f32::NEG_INFINITY, f32::max);
        }
    }
    let mut out = vec![0.0f32; heat.len()];
    for y in 0..height {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(height - 1);
        for x in 0..width {
            out[y * width + x] = (lo..=hi).map(|yy| rows[yy * width + x]).fold(f32::NEG_INFINITY, f32::max);
        }
    }
    out
}

/// Center candidates: pixels equal to the maximum of their window, with a
/// positive score of at least `center_threshold`. The threshold is applied
/// before keeping the `top_k` strongest; ordering is by descending score,
/// then row-major position.
pub fn find_centers(heat: &[f32], width: usize, height: usize, params: &FusionParams) -> Vec<Center> {
    if heat.is_empty() {
        return Vec::new();
    }
    let maxed = window_max(heat, width, height, params.nms_kernel / 2);
    let mut centers: Vec<(usize, f32)> = heat
        .iter()
        .zip(&maxed)
        .enumerate()
        .filter(|(_, (&v, &m))| v == m && v > 0.0 && v >= params.center_threshold)
        .map(|(i, (&v, _))| (i, v))
        .collect();
    centers.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    centers.truncate(params.top_k);
    centers
        .into_iter()
        .map(|(i, score)| Center {
            y: i / width,
            x: i % width,
            score,
        })
        .collect()
}
