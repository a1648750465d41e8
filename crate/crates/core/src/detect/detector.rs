use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use image::{ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use super::labels::parse_predictions;
use super::nms::{filter_and_nms, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
use super::types::{ClassList, Detection};
use super::DetectError;

/// An uploaded image. The filename is optional for remote detection but
/// required by the fixture detector, which keys its sidecar files on it.
#[derive(Debug, Clone, Copy)]
pub struct ImageInput<'a> {
    pub filename: Option<&'a str>,
    pub bytes: &'a [u8],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageInfo {
    pub format: ImageFormat,
    pub width: u32,
    pub height: u32,
}

impl ImageInfo {
    pub fn mime(&self) -> &'static str {
        match self.format {
            ImageFormat::Png => "image/png",
            _ => "image/jpeg",
        }
    }
}

/// Sniffs the payload and reads its dimensions. Only JPEG and PNG are accepted.
pub fn probe_image(bytes: &[u8]) -> Result<ImageInfo, DetectError> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| DetectError::InvalidImage(e.to_string()))?;
    let format = match reader.format() {
        Some(f @ (ImageFormat::Png | ImageFormat::Jpeg)) => f,
        Some(other) => {
            return Err(DetectError::InvalidImage(format!("unsupported image format {other:?}")))
        }
        None => return Err(DetectError::InvalidImage("payload is not a JPEG or PNG image".into())),
    };
    let (width, height) = reader
        .into_dimensions()
        .map_err(|e| DetectError::InvalidImage(e.to_string()))?;
    if width == 0 || height == 0 {
        return Err(DetectError::InvalidImage("image has zero size".into()));
    }
    Ok(ImageInfo { format, width, height })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutput {
    pub detections: Vec<Detection>,
    pub image_width: u32,
    pub image_height: u32,
}

#[async_trait]
pub trait Detector: Send + Sync {
    /// Post-processed detections in original-image pixel coordinates.
    async fn detect(&self, image: ImageInput<'_>) -> Result<DetectorOutput, DetectError>;

    fn mode(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    Remote,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    pub url: Option<String>,
    pub labels_dir: Option<PathBuf>,
    pub conf_threshold: f64,
    pub iou_threshold: f64,
    pub timeout_secs: f64,
    pub classes: ClassList,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mode: DetectorMode::Fixture,
            url: None,
            labels_dir: None,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            timeout_secs: 30.0,
            classes: ClassList::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        for (name, v) in [("conf_threshold", self.conf_threshold), ("iou_threshold", self.iou_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DetectError::Config(format!("detector.{name} must lie in [0, 1], got {v}")));
            }
        }
        if !self.timeout_secs.is_finite() || self.timeout_secs <= 0.0 {
            return Err(DetectError::Config("detector.timeout_secs must be positive".into()));
        }
        match self.mode {
            DetectorMode::Remote if self.url.is_none() => {
                Err(DetectError::Config("detector.url is required in remote mode".into()))
            }
            DetectorMode::Fixture if self.labels_dir.is_none() => {
                Err(DetectError::Config("detector.labels_dir is required in fixture mode".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Detector>, DetectError> {
        self.validate()?;
        Ok(match self.mode {
            DetectorMode::Fixture => Arc::new(FixtureDetector::new(
                self.labels_dir.clone().unwrap_or_default(),
                self.classes.clone(),
                self.conf_threshold,
                self.iou_threshold,
            )),
            DetectorMode::Remote => Arc::new(RemoteDetector::new(
                self.url.clone().unwrap_or_default(),
                self.classes.clone(),
                self.conf_threshold,
                self.iou_threshold,
                Duration::from_secs_f64(self.timeout_secs),
            )?),
        })
    }
}

fn post_process(dets: Vec<Detection>, info: &ImageInfo, conf: f64, iou: f64) -> Vec<Detection> {
    let (w, h) = (info.width as f64, info.height as f64);
    let clipped = dets
        .into_iter()
        .map(|d| Detection { bbox: d.bbox.clamp_to(w, h), ..d })
        .collect();
    filter_and_nms(clipped, conf, iou)
}

/// Replays `<labels_dir>/<image stem>.txt` prediction files. An image with an
/// empty sidecar has no detections; an image with no sidecar is an error.
#[derive(Debug, Clone)]
pub struct FixtureDetector {
    labels_dir: PathBuf,
    classes: ClassList,
    conf_threshold: f64,
    iou_threshold: f64,
}

impl FixtureDetector {
    pub fn new(labels_dir: impl Into<PathBuf>, classes: ClassList, conf_threshold: f64, iou_threshold: f64) -> Self {
        FixtureDetector {
            labels_dir: labels_dir.into(),
            classes,
            conf_threshold,
            iou_threshold,
        }
    }

    fn sidecar_for(&self, filename: &str) -> Option<PathBuf> {
        let stem = Path::new(filename).file_stem()?.to_str()?;
        Some(self.labels_dir.join(format!("{stem}.txt")))
    }
}

#[async_trait]
impl Detector for FixtureDetector {
    async fn detect(&self, image: ImageInput<'_>) -> Result<DetectorOutput, DetectError> {
        let info = probe_image(image.bytes)?;
        let filename = image
            .filename
            .ok_or_else(|| DetectError::NotFound("fixture detection needs the image filename".into()))?;
        let sidecar = self
            .sidecar_for(filename)
            .ok_or_else(|| DetectError::NotFound(format!("no sidecar name for `{filename}`")))?;
        let text = match tokio::fs::read_to_string(&sidecar).await {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(DetectError::NotFound(format!("no fixture labels at {}", sidecar.display())))
            }
            Err(e) => return Err(DetectError::Io(format!("{}: {e}", sidecar.display()))),
        };
        let raw = parse_predictions(&text, info.width, info.height, &self.classes)?;
        Ok(DetectorOutput {
            detections: post_process(raw, &info, self.conf_threshold, self.iou_threshold),
            image_width: info.width,
            image_height: info.height,
        })
    }

    fn mode(&self) -> &'static str {
        "fixture"
    }
}

/// Wire format returned by a remote detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteDetectResponse {
    pub detections: Vec<Detection>,
    pub image_width: u32,
    pub image_height: u32,
}

/// Posts the image as multipart field `image` to a detection server.
#[derive(Debug, Clone)]
pub struct RemoteDetector {
    client: reqwest::Client,
    url: String,
    classes: ClassList,
    conf_threshold: f64,
    iou_threshold: f64,
}

impl RemoteDetector {
    pub fn new(
        url: String,
        classes: ClassList,
        conf_threshold: f64,
        iou_threshold: f64,
        timeout: Duration,
    ) -> Result<Self, DetectError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| DetectError::Config(e.to_string()))?;
        Ok(RemoteDetector {
            client,
            url,
            classes,
            conf_threshold,
            iou_threshold,
        })
    }

    fn convert(&self, resp: RemoteDetectResponse, info: &ImageInfo) -> Result<Vec<Detection>, DetectError> {
        if resp.image_width == 0 || resp.image_height == 0 {
            return Err(DetectError::Protocol("detector reported a zero image size".into()));
        }
        // The server may have run on a resized copy; map back to the upload's pixels.
        let sx = info.width as f64 / resp.image_width as f64;
        let sy = info.height as f64 / resp.image_height as f64;
        resp.detections
            .into_iter()
            .map(|d| {
                let name = self.classes.name(d.class_id).ok_or_else(|| {
                    DetectError::Protocol(format!("detector returned unknown class id {}", d.class_id))
                })?;
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(DetectError::Protocol(format!("confidence {} outside [0, 1]", d.confidence)));
                }
                if !d.bbox.is_valid() {
                    return Err(DetectError::Protocol(format!("invalid box {:?}", d.bbox)));
                }
                Ok(Detection {
                    class_id: d.class_id,
                    class_name: name.to_string(),
                    bbox: d.bbox.scale(sx, sy),
                    confidence: d.confidence,
                })
            })
            .collect()
    }
}

#[async_trait]
impl Detector for RemoteDetector {
    async fn detect(&self, image: ImageInput<'_>) -> Result<DetectorOutput, DetectError> {
        let info = probe_image(image.bytes)?;
        let part = reqwest::multipart::Part::bytes(image.bytes.to_vec())
            .file_name(image.filename.unwrap_or("image").to_string())
            .mime_str(info.mime())
            .map_err(|e| DetectError::Protocol(e.to_string()))?;
        let form = reqwest::multipart::Form::new().part("image", part);
        let resp = self
            .client
            .post(&self.url)
            .multipart(form)
            .send()
            .await
            .map_err(|e| DetectError::Transport(format!("detector request failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(DetectError::Transport(format!("detector returned HTTP {status}")));
        }
        let body: RemoteDetectResponse = resp
            .json()
            .await
            .map_err(|e| DetectError::Protocol(format!("malformed detector response: {e}")))?;
        let raw = self.convert(body, &info)?;
        Ok(DetectorOutput {
            detections: post_process(raw, &info, self.conf_threshold, self.iou_threshold),
            image_width: info.width,
            image_height: info.height,
        })
    }

    fn mode(&self) -> &'static str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::BBox;

    pub(crate) fn png(w: u32, h: u32) -> Vec<u8> {
        let img = image::RgbImage::from_pixel(w, h, image::Rgb([40, 120, 40]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn probe_png_dimensions() {
        let info = probe_image(&png(32, 16)).unwrap();
        assert_eq!((info.width, info.height), (32, 16));
        assert_eq!(info.mime(), "image/png");
    }

    #[test]
    fn probe_rejects_text() {
        assert!(matches!(probe_image(b"hello, not an image"), Err(DetectError::InvalidImage(_))));
        assert!(matches!(probe_image(b""), Err(DetectError::InvalidImage(_))));
    }

    #[tokio::test]
    async fn fixture_replays_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("leaf.txt"), "1 0.5 0.5 0.5 0.5 0.9\n").unwrap();
        let det = FixtureDetector::new(dir.path(), ClassList::default(), 0.25, 0.45);
        let bytes = png(100, 100);
        let out = det
            .detect(ImageInput { filename: Some("leaf.jpg"), bytes: &bytes })
            .await
            .unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(out.detections[0].class_name, "miner");
        assert_eq!(out.detections[0].bbox, BBox::new(25., 25., 75., 75.).unwrap());
    }

    #[tokio::test]
    async fn fixture_missing_sidecar_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let det = FixtureDetector::new(dir.path(), ClassList::default(), 0.25, 0.45);
        let bytes = png(10, 10);
        let err = det
            .detect(ImageInput { filename: Some("nothing.png"), bytes: &bytes })
            .await
            .unwrap_err();
        assert!(matches!(err, DetectError::NotFound(_)));
    }

    #[tokio::test]
    async fn fixture_applies_threshold_and_clips() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("a.txt"),
            "3 0.9 0.9 0.4 0.4 0.8\n0 0.5 0.5 0.2 0.2 0.1\n",
        )
        .unwrap();
        let det = FixtureDetector::new(dir.path(), ClassList::default(), 0.25, 0.45);
        let bytes = png(100, 50);
        let out = det.detect(ImageInput { filename: Some("a.png"), bytes: &bytes }).await.unwrap();
        assert_eq!(out.detections.len(), 1);
        let b = out.detections[0].bbox;
        assert!(b.x2 <= 100.0 && b.y2 <= 50.0);
        assert!((b.x1 - 70.0).abs() < 1e-9 && (b.y1 - 35.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DetectorConfig::default();
        assert!(cfg.validate().is_err(), "fixture mode without labels dir");
        cfg.labels_dir = Some("labels".into());
        assert!(cfg.validate().is_ok());
        cfg.conf_threshold = 1.5;
        assert!(cfg.validate().is_err());
        let remote = DetectorConfig { mode: DetectorMode::Remote, ..DetectorConfig::default() };
        assert!(remote.validate().is_err());
    }
}
