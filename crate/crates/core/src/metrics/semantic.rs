use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panoptic::{ClassCatalog, ClassId};

/// Pixel confusion counts. Rows are ground-truth classes (eval classes only,
/// void rows are never filled); columns are predicted classes plus a final
/// column for predictions that are void or non-eval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n: n_classes,
            counts: vec![0; n_classes * (n_classes + 1)],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * (self.n + 1) + pred]
    }

    pub fn accumulate(&mut self, pred: &[ClassId], gt: &[ClassId], catalog: &ClassCatalog) {
        let other = self.n;
        for (&p, &g) in pred.iter().zip(gt) {
            if !catalog.is_eval(g) {
                continue;
            }
            let col = if catalog.is_eval(p) { p as usize } else { other };
            self.counts[g as usize * (self.n + 1) + col] += 1;
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// mIoU, fwIoU, mACC and pACC in percent. Classes absent from the ground
    /// truth are left out of the means; `None` when nothing was evaluated.
    pub fn scores(&self) -> Option<SemanticScores> {
        let n = self.n;
        let row = |c: usize| -> u64 { (0..=n).map(|j| self.get(c, j)).sum() };
        let col = |c: usize| -> u64 { (0..n).map(|i| self.get(i, c)).sum() };
        let total: u64 = (0..n).map(row).sum();
        if total == 0 {
            return None;
        }
        let mut iou_sum = 0.0;
        let mut acc_sum = 0.0;
        let mut fw_sum = 0.0;
        let mut present = 0usize;
        let mut correct = 0u64;
        for c in 0..n {
            let gt_c = row(c);
            let tp = self.get(c, c);
            correct += tp;
            if gt_c == 0 {
                continue;
            }
            present += 1;
            let fp = col(c) - tp;
            let iou = tp as f64 / (gt_c + fp) as f64;
            iou_sum += iou;
            acc_sum += tp as f64 / gt_c as f64;
            fw_sum += gt_c as f64 * iou;
        }
        Some(SemanticScores {
            miou: 100.0 * iou_sum / present as f64,
            fwiou: 100.0 * fw_sum / total as f64,
            macc: 100.0 * acc_sum / present as f64,
            pacc: 100.0 * correct as f64 / total as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores {
    pub miou: f64,
    pub fwiou: f64,
    pub macc: f64,
    pub pacc: f64,
}

/// Semantic metrics of a single prediction. All-void ground truth yields
/// `Ok(None)`: the metrics are absent rather than zero.
pub fn semantic_metrics(pred: &[ClassId], gt: &[ClassId], catalog: &ClassCatalog) -> Result<Option<SemanticScores>> {
    if pred.len() != gt.len() {
        return Err(Error::Input(format!(
            "prediction has {} pixels, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(catalog.len());
    cm.accumulate(pred, gt, catalog);
    Ok(cm.scores())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_scores_100() {
        let cat = ClassCatalog::desk();
        let gt = [0, 1, 1, 8, 6];
        let s = semantic_metrics(&gt, &gt, &cat).unwrap().unwrap();
        assert_eq!((s.miou, s.fwiou, s.macc, s.pacc), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn two_class_four_pixel_example() {
        let cat = ClassCatalog::desk();
        let s = semantic_metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], &cat).unwrap().unwrap();
        assert!((s.miou - 100.0 * (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((s.miou - 58.33).abs() < 5e-3);
        assert_eq!(s.pacc, 75.0);
    }

    #[test]
    fn disjoint_prediction_scores_zero() {
        let cat = ClassCatalog::desk();
        let s = semantic_metrics(&[1, 1, 0, 0], &[0, 0, 1, 1], &cat).unwrap().unwrap();
        assert_eq!((s.miou, s.pacc), (0.0, 0.0));
    }

    #[test]
    fn all_void_ground_truth_is_absent() {
        let cat = ClassCatalog::desk();
        assert!(semantic_metrics(&[0, 1], &[255, 255], &cat).unwrap().is_none());
    }

    #[test]
    fn void_prediction_counts_as_miss() {
        let cat = ClassCatalog::desk();
        let s = semantic_metrics(&[255, 0], &[0, 0], &cat).unwrap().unwrap();
        assert_eq!(s.pacc, 50.0);
        assert_eq!(s.miou, 50.0);
    }
}
