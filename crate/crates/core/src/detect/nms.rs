use super::geometry::iou;
use super::types::Detection;

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.45;

/// Sorts by descending confidence; equal confidences keep input order.
fn sort_by_confidence(dets: &mut [Detection]) {
    dets.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
}

/// Drops detections below `conf_threshold`, then runs class-wise greedy NMS:
/// a box is suppressed when its IoU with an already kept box of the same
/// class exceeds `iou_threshold`. Output is ordered by descending confidence.
pub fn filter_and_nms(dets: Vec<Detection>, conf_threshold: f64, iou_threshold: f64) -> Vec<Detection> {
    let mut candidates: Vec<Detection> = dets
        .into_iter()
        .filter(|d| d.confidence >= conf_threshold)
        .collect();
    sort_by_confidence(&mut candidates);

    let mut kept: Vec<Detection> = Vec::with_capacity(candidates.len());
    for det in candidates {
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == det.class_id && iou(&k.bbox, &det.bbox) > iou_threshold);
        if !suppressed {
            kept.push(det);
        }
    }
    kept
}
