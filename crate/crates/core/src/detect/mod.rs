//! Detection geometry, YOLO label files, post-processing, and detector backends.

mod detector;
mod geometry;
mod labels;
mod nms;
mod types;

pub use detector::{
    probe_image, Detector, DetectorConfig, DetectorMode, DetectorOutput, FixtureDetector, ImageInfo,
    ImageInput, RemoteDetectResponse, RemoteDetector,
};
pub use geometry::{iou, BBox};
pub use labels::{parse_predictions, parse_yolo_labels, serialize_labels, serialize_predictions};
pub use nms::{filter_and_nms, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
pub use types::{ClassList, Detection, GroundTruthBox, DEFAULT_CLASSES};

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}
