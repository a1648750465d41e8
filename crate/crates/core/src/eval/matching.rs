use serde::{Deserialize, Serialize};

use crate::detect::{iou, Detection, GroundTruthBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPrediction {
    pub confidence: f64,
    pub is_tp: bool,
    pub class_id: usize,
}

/// Greedy matching for one image.
///
/// Predictions are visited by descending confidence (input order breaks ties).
/// Each one claims the unmatched same-class ground truth with the highest IoU
/// (earliest index on ties); it is a true positive iff that IoU reaches
/// `iou_threshold`, in which case the ground truth is consumed. The result is
/// in visiting order.
pub fn match_predictions(
    preds: &[Detection],
    gts: &[GroundTruthBox],
    iou_threshold: f64,
) -> Vec<MatchedPrediction> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));

    let mut consumed = vec![false; gts.len()];
    order
        .into_iter()
        .map(|pi| {
            let pred = &preds[pi];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if consumed[gi] || gt.class_id != pred.class_id {
                    continue;
                }
                let v = iou(&pred.bbox, &gt.bbox);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((gi, v));
                }
            }
            let is_tp = match best {
                Some((gi, v)) if v >= iou_threshold => {
                    consumed[gi] = true;
                    true
                }
                _ => false,
            };
            MatchedPrediction {
                confidence: pred.confidence,
                is_tp,
                class_id: pred.class_id,
            }
        })
        .collect()
}
