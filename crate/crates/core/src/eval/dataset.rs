use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ap::{ap_range, average_precision, coco_iou_thresholds, precision_recall_at};
use super::matching::{match_predictions, MatchedPrediction};
use super::report::{aggregate_overall, ClassMetrics, EvalReport};
use super::EvalError;
use crate::detect::{parse_predictions, parse_yolo_labels, ClassList, DetectError, Detection, GroundTruthBox};

/// Predictions and annotations for one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageEval {
    pub name: String,
    pub predictions: Vec<Detection>,
    pub ground_truth: Vec<GroundTruthBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Predictions below this confidence are discarded before matching.
    pub conf_threshold: f64,
    /// Threshold for the precision, recall and single-threshold AP columns.
    pub iou_threshold: f64,
    /// Thresholds averaged for the ranged AP column.
    pub range_thresholds: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            conf_threshold: 0.0,
            iou_threshold: 0.5,
            range_thresholds: coco_iou_thresholds().to_vec(),
        }
    }
}

/// Pixel sizes for label denormalization, keyed by image file stem.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSizes {
    Manifest(HashMap<String, (u32, u32)>),
    /// Every image has the same size. IoU is invariant to per-axis scaling, so
    /// `Uniform(1, 1)` gives the same metrics as true sizes.
    Uniform(u32, u32),
}

impl ImageSizes {
    pub fn lookup(&self, stem: &str) -> Option<(u32, u32)> {
        match self {
            ImageSizes::Manifest(m) => m.get(stem).copied(),
            ImageSizes::Uniform(w, h) => Some((*w, *h)),
        }
    }

    /// Reads a `filename,width,height` CSV. A header row is optional.
    pub fn from_manifest(path: &Path) -> Result<Self, EvalError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
        let mut map = HashMap::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
            if rec.len() != 3 {
                return Err(EvalError::Manifest(format!("row {}: expected 3 columns", i + 1)));
            }
            let dims = (rec[1].parse::<u32>(), rec[2].parse::<u32>());
            let (w, h) = match dims {
                (Ok(w), Ok(h)) if w > 0 && h > 0 => (w, h),
                _ if i == 0 => continue,
                _ => return Err(EvalError::Manifest(format!("row {}: invalid width/height", i + 1))),
            };
            map.insert(stem_of(&rec[0]), (w, h));
        }
        Ok(ImageSizes::Manifest(map))
    }
}

fn stem_of(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name)
        .to_string()
}

/// Computes the per-class table and macro row for in-memory images.
pub fn evaluate_images(images: &[ImageEval], classes: &ClassList, opts: &EvalOptions) -> EvalReport {
    let n_classes = classes.len();
    let mut n_gt = vec![0usize; n_classes];
    let mut n_pred = vec![0usize; n_classes];

    let mut thresholds: Vec<f64> = vec![opts.iou_threshold];
    thresholds.extend(opts.range_thresholds.iter().copied());
    // per threshold, per class
    let mut matched: Vec<Vec<Vec<MatchedPrediction>>> = vec![vec![Vec::new(); n_classes]; thresholds.len()];

    for image in images {
        let preds: Vec<Detection> = image
            .predictions
            .iter()
            .filter(|d| d.confidence >= opts.conf_threshold && d.class_id < n_classes)
            .cloned()
            .collect();
        for p in &preds {
            n_pred[p.class_id] += 1;
        }
        for g in image.ground_truth.iter().filter(|g| g.class_id < n_classes) {
            n_gt[g.class_id] += 1;
        }
        for (ti, &t) in thresholds.iter().enumerate() {
            for m in match_predictions(&preds, &image.ground_truth, t) {
                matched[ti][m.class_id].push(m);
            }
        }
    }

    let mut per_class = Vec::new();
    let mut excluded_classes = Vec::new();
    for (c, name) in classes.names().iter().enumerate() {
        if n_gt[c] == 0 && n_pred[c] == 0 {
            excluded_classes.push(name.clone());
            continue;
        }
        let (precision, recall) = precision_recall_at(&matched[0][c], n_gt[c]);
        let ap50 = average_precision(&matched[0][c], n_gt[c]).unwrap_or(0.0);
        let mut ranged = matched[1..].iter();
        let ap50_95 = ap_range(&opts.range_thresholds, |_| {
            ranged.next().and_then(|m| average_precision(&m[c], n_gt[c]))
        })
        .unwrap_or(0.0);
        per_class.push(ClassMetrics {
            class_name: name.clone(),
            precision,
            recall,
            ap50,
            ap50_95,
            n_gt: n_gt[c],
            n_pred: n_pred[c],
        });
    }

    EvalReport {
        overall: aggregate_overall(&per_class).ok(),
        per_class,
        excluded_classes,
        images: images.len(),
        instances: n_gt.iter().sum(),
        conf_threshold: opts.conf_threshold,
        iou_threshold: opts.iou_threshold,
    }
}

fn label_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, EvalError> {
    let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", dir.display()));
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            out.insert(stem_of(&path.to_string_lossy()), path);
        }
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

fn parse_err(path: &Path) -> impl Fn(DetectError) -> EvalError + '_ {
    move |e| EvalError::Parse(format!("{}: {e}", path.display()))
}

/// Evaluates YOLO-format prediction files against ground-truth label files.
///
/// Files pair up by stem. An image with no prediction file has no
/// predictions; a prediction file with no ground-truth partner is an error.
pub fn evaluate_dataset(
    pred_dir: &Path,
    gt_dir: &Path,
    classes: &ClassList,
    sizes: &ImageSizes,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let gt_files = label_files(gt_dir)?;
    let pred_files = label_files(pred_dir)?;

    let orphans: Vec<String> = pred_files
        .keys()
        .filter(|k| !gt_files.contains_key(*k))
        .cloned()
        .collect();
    if !orphans.is_empty() {
        return Err(EvalError::OrphanPredictions(orphans));
    }
    let missing: BTreeSet<String> = gt_files
        .keys()
        .filter(|k| sizes.lookup(k).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingImageSize(missing.into_iter().collect()));
    }

    let mut images = Vec::with_capacity(gt_files.len());
    for (stem, gt_path) in &gt_files {
        let (w, h) = sizes.lookup(stem).unwrap_or((1, 1));
        let ground_truth = parse_yolo_labels(&read_file(gt_path)?, w, h, classes).map_err(parse_err(gt_path))?;
        let predictions = match pred_files.get(stem) {
            Some(p) => parse_predictions(&read_file(p)?, w, h, classes).map_err(parse_err(p))?,
            None => Vec::new(),
        };
        images.push(ImageEval { name: stem.clone(), predictions, ground_truth });
    }
    Ok(evaluate_images(&images, classes, opts))
}
