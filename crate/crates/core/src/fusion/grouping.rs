use super::centers::Center;

/// Assigns each thing pixel to the center nearest to `p + offset(p)`.
/// Instance ids are `1..=centers.len()` in center order; equal distances go
/// to the lower index. With no centers every pixel stays 0 (unassigned).
pub fn group_instances(offset: &[f32], width: usize, height: usize, centers: &[Center], thing_mask: &[bool]) -> Vec<u32> {
    let mut out = vec![0u32; width * height];
    if centers.is_empty() {
        return out;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        if !thing_mask[i] {
            continue;
        }
        let ty = (i / width) as f64 + offset[2 * i] as f64;
        let tx = (i % width) as f64 + offset[2 * i + 1] as f64;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (k, c) in centers.iter().enumerate() {
            let d = (c.y as f64 - ty).powi(2) + (c.x as f64 - tx).powi(2);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        *slot = best as u32 + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(y: usize, x: usize) -> Center {
        Center { y, x, score: 1.0 }
    }

    #[test]
    fn single_pixel_single_center() {
        let ids = group_instances(&[0.0, 0.0], 1, 1, &[c(0, 0)], &[true]);
        assert_eq!(ids, vec![1]);
    }

    #[test]
    fn offset_moves_pixel_to_second_center() {
        let mut off = vec![0.0f32; 20];
        off[2 * 4 + 1] = 1.0;
        let mut mask = vec![false; 10];
        mask[4] = true;
        let ids = group_instances(&off, 10, 1, &[c(0, 0), c(0, 9)], &mask);
        assert_eq!(ids[4], 2);
        assert_eq!(ids.iter().filter(|&&v| v != 0).count(), 1);
    }

    #[test]
    fn equidistant_goes_to_lower_index() {
        let mut mask = vec![false; 9];
        mask[4] = true;
        let ids = group_instances(&[0.0; 18], 9, 1, &[c(0, 8), c(0, 0)], &mask);
        assert_eq!(ids[4], 1);
    }

    #[test]
    fn no_centers_leaves_pixels_unassigned() {
        assert_eq!(group_instances(&[0.0; 4], 2, 1, &[], &[true, true]), vec![0, 0]);
    }
}
