//! YOLO text label files: `class x_c y_c w h [conf]` per line, normalized to
//! the image size.

use std::fmt::Write as _;

use super::geometry::BBox;
use super::types::{ClassList, Detection, GroundTruthBox};
use super::DetectError;

// Absorbs rounding from re-normalizing pixel boxes on serialization.
const NORM_SLACK: f64 = 1e-9;

struct ParsedLine {
    class_id: usize,
    bbox: BBox,
    confidence: Option<f64>,
}

fn parse_lines(
    text: &str,
    image_w: f64,
    image_h: f64,
    classes: &ClassList,
    with_confidence: bool,
) -> Result<Vec<ParsedLine>, DetectError> {
    let expected = if with_confidence { 6 } else { 5 };
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| DetectError::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != expected {
            return Err(err(format!("expected {expected} fields, found {}", fields.len())));
        }
        let class_id: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("class id `{}` is not a non-negative integer", fields[0])))?;
        if class_id >= classes.len() {
            return Err(err(format!(
                "class id {class_id} out of range for {} classes",
                classes.len()
            )));
        }
        let mut nums = [0.0f64; 5];
        for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
            let v: f64 = field
                .parse()
                .map_err(|_| err(format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("`{field}` is not finite")));
            }
            *slot = v;
        }
        let [xc, yc, w, h, conf] = nums;
        for (name, v) in [("x_center", xc), ("y_center", yc), ("width", w), ("height", h)] {
            if !(-NORM_SLACK..=1.0 + NORM_SLACK).contains(&v) {
                return Err(err(format!("{name} {v} outside [0, 1]")));
            }
        }
        let confidence = if with_confidence {
            if !(0.0..=1.0).contains(&conf) {
                return Err(err(format!("confidence {conf} outside [0, 1]")));
            }
            Some(conf)
        } else {
            None
        };
        out.push(ParsedLine {
            class_id,
            bbox: BBox::from_normalized_xywh(xc, yc, w, h, image_w, image_h),
            confidence,
        });
    }
    Ok(out)
}

/// Parses a ground-truth label file into pixel boxes, preserving line order.
pub fn parse_yolo_labels(
    text: &str,
    image_w: u32,
    image_h: u32,
    classes: &ClassList,
) -> Result<Vec<GroundTruthBox>, DetectError> {
    Ok(parse_lines(text, image_w as f64, image_h as f64, classes, false)?
        .into_iter()
        .map(|p| GroundTruthBox { class_id: p.class_id, bbox: p.bbox })
        .collect())
}

/// Parses a prediction file (label format plus a trailing confidence).
pub fn parse_predictions(
    text: &str,
    image_w: u32,
    image_h: u32,
    classes: &ClassList,
) -> Result<Vec<Detection>, DetectError> {
    Ok(parse_lines(text, image_w as f64, image_h as f64, classes, true)?
        .into_iter()
        .map(|p| Detection {
            class_id: p.class_id,
            class_name: classes.name(p.class_id).unwrap_or_default().to_string(),
            bbox: p.bbox,
            confidence: p.confidence.unwrap_or(1.0),
        })
        .collect())
}

fn push_xywh(out: &mut String, class_id: usize, bbox: &BBox, image_w: u32, image_h: u32) {
    let [xc, yc, w, h] = bbox.to_normalized_xywh(image_w as f64, image_h as f64);
    let _ = write!(out, "{class_id} {xc} {yc} {w} {h}");
}

pub fn serialize_labels(gts: &[GroundTruthBox], image_w: u32, image_h: u32) -> String {
    let mut out = String::new();
    for gt in gts {
        push_xywh(&mut out, gt.class_id, &gt.bbox, image_w, image_h);
        out.push('\n');
    }
    out
}

pub fn serialize_predictions(dets: &[Detection], image_w: u32, image_h: u32) -> String {
    let mut out = String::new();
    for d in dets {
        push_xywh(&mut out, d.class_id, &d.bbox, image_w, image_h);
        let _ = writeln!(out, " {}", d.confidence);
    }
    out
}
