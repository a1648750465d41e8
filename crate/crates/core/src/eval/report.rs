use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_name: String,
    pub precision: f64,
    pub recall: f64,
    pub ap50: f64,
    pub ap50_95: f64,
    pub n_gt: usize,
    pub n_pred: usize,
}

/// Macro (unweighted) mean of the class rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub precision: f64,
    pub recall: f64,
    pub ap50: f64,
    pub ap50_95: f64,
}

impl OverallMetrics {
    /// Each column rounded half-up to three decimals, as displayed.
    pub fn rounded(&self) -> OverallMetrics {
        OverallMetrics {
            precision: round3(self.precision),
            recall: round3(self.recall),
            ap50: round3(self.ap50),
            ap50_95: round3(self.ap50_95),
        }
    }

    pub fn as_thousandths(&self) -> [i64; 4] {
        [
            thousandths(self.precision),
            thousandths(self.recall),
            thousandths(self.ap50),
            thousandths(self.ap50_95),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Classes with at least one ground truth or prediction, in class-list order.
    pub per_class: Vec<ClassMetrics>,
    /// Classes with neither ground truth nor predictions; AP is undefined for them.
    pub excluded_classes: Vec<String>,
    pub overall: Option<OverallMetrics>,
    pub images: usize,
    pub instances: usize,
    pub conf_threshold: f64,
    pub iou_threshold: f64,
}

/// Value in integer thousandths, rounded half-up.
///
/// The value is first snapped to nine decimals so that a mean such as
/// 0.4535 that lands on 0.45349999... in binary still rounds up.
pub fn thousandths(x: f64) -> i64 {
    let nano = (x * 1e9).round() as i64;
    (nano + 500_000).div_euclid(1_000_000)
}

pub fn round3(x: f64) -> f64 {
    thousandths(x) as f64 / 1000.0
}

pub fn format3(x: f64) -> String {
    let t = thousandths(x);
    let sign = if t < 0 { "-" } else { "" };
    let t = t.abs();
    format!("{sign}{}.{:03}", t / 1000, t % 1000)
}

pub fn aggregate_overall(rows: &[ClassMetrics]) -> Result<OverallMetrics, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NoClasses);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(OverallMetrics {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        ap50: mean(|r| r.ap50),
        ap50_95: mean(|r| r.ap50_95),
    })
}

impl EvalReport {
    /// Fixed-width table in the layout of a class-wise detection summary.
    pub fn to_table(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|r| r.class_name.len())
            .chain(["Overall".len(), "Class".len()])
            .max()
            .unwrap_or(7);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>6}  {:>7}  {:>12}  {:>6}  {:>6}",
            "Class", "Precision", "Recall", "mAP@0.5", "mAP@0.5:0.95", "n_gt", "n_pred"
        );
        for r in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9}  {:>6}  {:>7}  {:>12}  {:>6}  {:>6}",
                r.class_name,
                format3(r.precision),
                format3(r.recall),
                format3(r.ap50),
                format3(r.ap50_95),
                r.n_gt,
                r.n_pred
            );
        }
        match &self.overall {
            Some(o) => {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>9}  {:>6}  {:>7}  {:>12}  {:>6}  {:>6}",
                    "Overall",
                    format3(o.precision),
                    format3(o.recall),
                    format3(o.ap50),
                    format3(o.ap50_95),
                    self.instances,
                    self.per_class.iter().map(|r| r.n_pred).sum::<usize>()
                );
            }
            None => {
                let _ = writeln!(out, "{:<width$}  (no evaluable classes)", "Overall");
            }
        }
        if !self.excluded_classes.is_empty() {
            let _ = writeln!(out, "excluded (no labels or predictions): {}", self.excluded_classes.join(", "));
        }
        let _ = writeln!(out, "images: {}  instances: {}", self.images, self.instances);
        out
    }
}
