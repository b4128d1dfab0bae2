//! Detector output ingestion, de-duplication and the evaluation harness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;
/// Same-label boxes overlapping more than this are treated as duplicates.
pub const DEDUPE_IOU: f64 = 0.6;
/// Minimum IoU for a detection to count as matching a ground-truth box.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("detection document: {0}")]
    Schema(String),
}

/// Axis-aligned box in pixels, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    /// Intersection with the image rectangle, `None` when nothing is left.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<Self> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width);
        let y1 = (self.y + self.h).min(height);
        (x1 > x0 && y1 > y0).then(|| Self::new(x0, y0, x1 - x0, y1 - y0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub label: String,
    pub bbox: BoundingBox,
}

/// On-disk detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDocument {
    pub image_width: u32,
    pub image_height: u32,
    pub detections: Vec<Detection>,
}

impl DetectionDocument {
    pub fn parse(document: &[u8]) -> Result<Self, DetectionError> {
        let doc: Self =
            serde_json::from_slice(document).map_err(|e| DetectionError::Schema(e.to_string()))?;
        if doc.image_width == 0 || doc.image_height == 0 {
            return Err(DetectionError::Schema("image dimensions must be positive".into()));
        }
        for (i, det) in doc.detections.iter().enumerate() {
            if det.label.trim().is_empty() {
                return Err(DetectionError::Schema(format!("detection {i}: empty label")));
            }
            if !det.bbox.is_valid() {
                return Err(DetectionError::Schema(format!(
                    "detection {i}: bbox needs finite values and positive width and height"
                )));
            }
            if !(0.0..=1.0).contains(&det.confidence) {
                return Err(DetectionError::Schema(format!(
                    "detection {i}: confidence {} outside [0, 1]",
                    det.confidence
                )));
            }
        }
        Ok(doc)
    }
}

/// Lowercases and trims; strips a trailing plural `s` when the catalog knows
/// the singular but not the plural.
pub fn normalize_label(raw: &str, catalog: Option<&Catalog>) -> String {
    let lower = raw.trim().to_lowercase();
    if let Some(catalog) = catalog {
        if !catalog.contains(&lower) {
            if let Some(singular) = lower.strip_suffix('s') {
                if catalog.contains(singular) {
                    return singular.to_string();
                }
            }
        }
    }
    lower
}

/// Parses a detection file, clamps boxes to the image, drops low-confidence
/// entries and normalizes labels. An empty result is a valid, empty plate.
pub fn load_detections(
    document: &[u8],
    image_w: u32,
    image_h: u32,
    min_confidence: f64,
    catalog: Option<&Catalog>,
) -> Result<Vec<Detection>, DetectionError> {
    let doc = DetectionDocument::parse(document)?;
    if (doc.image_width, doc.image_height) != (image_w, image_h) {
        return Err(DetectionError::Schema(format!(
            "document describes a {}x{} image but the image is {image_w}x{image_h}",
            doc.image_width, doc.image_height
        )));
    }
    Ok(doc
        .detections
        .into_iter()
        .filter(|d| d.confidence >= min_confidence)
        .filter_map(|d| {
            let bbox = d.bbox.clamp_to(f64::from(image_w), f64::from(image_h))?;
            Some(Detection {
                label: normalize_label(&d.label, catalog),
                bbox,
                confidence: d.confidence,
            })
        })
        .collect())
}

/// Intersection over union; 0 for disjoint boxes.
/// Length of the overlap of `[s1, s1+l1)` and `[s2, s2+l2)`. A nested
/// interval contributes its own length so that identical boxes give exactly 1.
fn overlap(s1: f64, l1: f64, s2: f64, l2: f64) -> f64 {
    let (e1, e2) = (s1 + l1, s2 + l2);
    if s1 >= s2 && e1 <= e2 {
        l1
    } else if s2 >= s1 && e2 <= e1 {
        l2
    } else {
        (e1.min(e2) - s1.max(s2)).max(0.0)
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = overlap(a.x, a.w, b.x, b.w);
    let ih = overlap(a.y, a.h, b.y, b.h);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

fn by_confidence(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.label.cmp(&b.label))
        .then_with(|| a.bbox.y.total_cmp(&b.bbox.y))
        .then_with(|| a.bbox.x.total_cmp(&b.bbox.x))
        .then_with(|| a.bbox.w.total_cmp(&b.bbox.w))
        .then_with(|| a.bbox.h.total_cmp(&b.bbox.h))
}

/// Greedy same-label suppression: a box is dropped when a higher-confidence
/// box of the same label overlaps it by more than [`DEDUPE_IOU`].
pub fn dedupe(dets: &[Detection]) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(by_confidence);
    let mut kept: Vec<Detection> = Vec::with_capacity(sorted.len());
    for det in sorted {
        let duplicate = kept
            .iter()
            .any(|k| k.label == det.label && iou(&k.bbox, &det.bbox) > DEDUPE_IOU);
        if !duplicate {
            kept.push(det);
        }
    }
    kept
}

/// Per-box detection quality. Ratios whose denominator is zero are reported
/// as 0 with the matching `*_defined` flag cleared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub mean_iou: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub accuracy_defined: bool,
    pub mean_iou_defined: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (num / den, true)
    } else {
        (0.0, false)
    }
}

/// Greedy one-to-one matching by descending IoU; a pair needs the same label
/// and IoU of at least [`MATCH_IOU`]. Accuracy is TP / (TP + FP + FN).
pub fn evaluate(dets: &[Detection], truth: &[GroundTruthBox]) -> Metrics {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (di, d) in dets.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            if d.label != t.label {
                continue;
            }
            let overlap = iou(&d.bbox, &t.bbox);
            if overlap >= MATCH_IOU {
                pairs.push((overlap, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_used = vec![false; dets.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matched_iou = Vec::new();
    for (overlap, di, ti) in pairs {
        if !det_used[di] && !truth_used[ti] {
            det_used[di] = true;
            truth_used[ti] = true;
            matched_iou.push(overlap);
        }
    }

    let tp = matched_iou.len();
    let fp = dets.len() - tp;
    let fn_ = truth.len() - tp;
    let (precision, precision_defined) = ratio(tp as f64, (tp + fp) as f64);
    let (recall, recall_defined) = ratio(tp as f64, (tp + fn_) as f64);
    let (accuracy, accuracy_defined) = ratio(tp as f64, (tp + fp + fn_) as f64);
    let (mean_iou, mean_iou_defined) = ratio(matched_iou.iter().sum(), tp as f64);
    Metrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        accuracy,
        mean_iou,
        precision_defined,
        recall_defined,
        accuracy_defined,
        mean_iou_defined,
    }
}
