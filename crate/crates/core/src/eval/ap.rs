use super::matching::MatchedPrediction;

/// Number of recall sample points used for interpolated AP (0.00 to 1.00).
pub const RECALL_POINTS: usize = 101;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

fn sorted_by_confidence(matches: &[MatchedPrediction]) -> Vec<MatchedPrediction> {
    let mut sorted = matches.to_vec();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    sorted
}

/// 101-point interpolated average precision for one class.
///
/// Returns `None` when the class has neither ground truth nor predictions,
/// in which case it is excluded from aggregation.
pub fn average_precision(matches: &[MatchedPrediction], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return if matches.is_empty() { None } else { Some(0.0) };
    }
    let sorted = sorted_by_confidence(matches);

    let mut recall = Vec::with_capacity(sorted.len());
    let mut precision = Vec::with_capacity(sorted.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for m in &sorted {
        if m.is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // precision envelope: max precision at this or any later (higher recall) point
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let mut sum = 0.0;
    let mut idx = 0usize;
    for r in 0..RECALL_POINTS {
        let level = r as f64 / 100.0;
        while idx < recall.len() && recall[idx] < level {
            idx += 1;
        }
        if idx < recall.len() {
            sum += precision[idx];
        }
    }
    Some(sum / RECALL_POINTS as f64)
}

/// Unweighted mean of per-threshold AP over the given IoU thresholds.
/// Thresholds where AP is undefined are skipped; `None` if all are.
pub fn ap_range<F>(thresholds: &[f64], mut ap_at: F) -> Option<f64>
where
    F: FnMut(f64) -> Option<f64>,
{
    let values: Vec<f64> = thresholds.iter().filter_map(|&t| ap_at(t)).collect();
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Single operating point: all predictions given.
pub fn precision_recall_at(matches: &[MatchedPrediction], n_gt: usize) -> (f64, f64) {
    let tp = matches.iter().filter(|m| m.is_tp).count();
    let precision = if matches.is_empty() { 0.0 } else { tp as f64 / matches.len() as f64 };
    let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
    (precision, recall)
}
