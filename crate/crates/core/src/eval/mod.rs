//! Detection metrics: greedy IoU matching, 101-point interpolated AP, and the
//! class-wise table with its macro-averaged overall row.

mod ap;
mod dataset;
mod matching;
mod report;

pub use ap::{ap_range, average_precision, coco_iou_thresholds, precision_recall_at, RECALL_POINTS};
pub use dataset::{evaluate_dataset, evaluate_images, EvalOptions, ImageEval, ImageSizes};
pub use matching::{match_predictions, MatchedPrediction};
pub use report::{aggregate_overall, format3, round3, thousandths, ClassMetrics, EvalReport, OverallMetrics};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot aggregate an empty set of class rows")]
    NoClasses,
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error in {0}")]
    Parse(String),
    #[error("prediction files without ground truth: {}", .0.join(", "))]
    OrphanPredictions(Vec<String>),
    #[error("no image size for: {}", .0.join(", "))]
    MissingImageSize(Vec<String>),
    #[error("manifest error: {0}")]
    Manifest(String),
}
