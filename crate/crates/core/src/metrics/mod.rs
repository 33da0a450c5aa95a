//! Evaluation suite: panoptic quality with unique matching, semantic
//! segmentation metrics, mask AP, dataset aggregation and delta reports.
//!
//! Every per-image result is an [`ImageEval`] of integer tallies; the
//! dataset report is computed only after all tallies have been merged, so
//! the result does not depend on how images were sharded or ordered.

mod accumulate;
mod ap;
mod delta;
mod matching;
mod pq;
mod report;
mod semantic;

pub use accumulate::{aggregate, evaluate_image, evaluate_pair, EvalAccumulator, ImageEval};
pub use ap::{instance_ap, instances_from_labels, ApTally, Detection, InstancePrediction, AP_THRESHOLDS_PCT};
pub use delta::{delta_report, DeltaReport};
pub use matching::{match_segments, ClassMatches, MatchResult, SegmentMatch};
pub use pq::{panoptic_quality, ClassTally, PanopticScores, PqTriple};
pub use report::{ClassScore, GroupScores, MetricReport};
pub use semantic::{semantic_metrics, ConfusionMatrix, SemanticScores};
