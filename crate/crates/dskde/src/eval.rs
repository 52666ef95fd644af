//! Detection-quality metrics: image-level F1 and box-level IoU against
//! ground-truth annotations.
//!
//! A frame counts as a true positive when a box is detected and the
//! annotation carries one, as a false positive when a box is detected on a
//! vacant frame, and as a false negative when an annotated box goes
//! undetected. IoU is aggregated only over frames where both a detection and
//! a ground-truth box exist.

use std::collections::BTreeMap;

use crate::extract::BBox;
use crate::{Error, Result};

/// Frame-level class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Vacant,
    Safe,
    Unsafe,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Vacant => "vacant",
            Label::Safe => "safe",
            Label::Unsafe => "unsafe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vacant" => Ok(Label::Vacant),
            "safe" => Ok(Label::Safe),
            "unsafe" => Ok(Label::Unsafe),
            other => Err(Error::InvalidParameter(format!("unknown label `{other}`"))),
        }
    }
}

/// Ground-truth record for one frame: a box is present iff the label is not
/// vacant.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    frame_id: String,
    label: Label,
    bbox: Option<BBox>,
}

impl Annotation {
    pub fn new(frame_id: impl Into<String>, label: Label, bbox: Option<BBox>) -> Result<Self> {
        match (label, &bbox) {
            (Label::Vacant, Some(_)) => Err(Error::InvalidParameter(
                "vacant frames cannot carry a ground-truth box".into(),
            )),
            (Label::Safe | Label::Unsafe, None) => Err(Error::InvalidParameter(
                "non-vacant frames must carry a ground-truth box".into(),
            )),
            _ => Ok(Self {
                frame_id: frame_id.into(),
                label,
                bbox,
            }),
        }
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn bbox(&self) -> Option<&BBox> {
        self.bbox.as_ref()
    }
}

/// Detector output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_id: String,
    pub bbox: Option<BBox>,
    /// Wall time spent producing this detection, when recorded.
    pub seconds: Option<f64>,
}

/// Pixel-count intersection over union of two half-open boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter_rows = a.r1.min(b.r1).saturating_sub(a.r0.max(b.r0));
    let inter_cols = a.c1.min(b.c1).saturating_sub(a.c0.max(b.c0));
    let inter = inter_rows * inter_cols;
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

fn confusion(
    detections: &[Detection],
    annotations: &[Annotation],
) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut by_id: BTreeMap<&str, &Detection> = BTreeMap::new();
    for d in detections {
        if by_id.insert(&d.frame_id, d).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate detection for frame `{}`",
                d.frame_id
            )));
        }
    }
    if by_id.len() != annotations.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} annotated frames", annotations.len()),
            actual: format!("{} detections", by_id.len()),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut ious = Vec::new();
    for ann in annotations {
        let det = by_id.remove(ann.frame_id()).ok_or_else(|| {
            Error::InvalidParameter(format!("no detection for frame `{}`", ann.frame_id()))
        })?;
        match (&det.bbox, ann.bbox()) {
            (Some(d), Some(g)) => {
                tp += 1;
                ious.push(iou(d, g));
            }
            (Some(_), None) => fp += 1,
            (None, Some(_)) => fn_ += 1,
            (None, None) => {} // true negative: does not enter F1
        }
    }
    Ok((tp, fp, fn_, ious))
}

/// Image-level `F1 = 2*TP / (2*TP + FP + FN)`. Frames with neither a
/// detection nor an annotated box do not enter. An evaluation with no
/// positives and no mistakes (all true negatives) scores 1.
pub fn f1(detections: &[Detection], annotations: &[Annotation]) -> Result<f64> {
    let (tp, fp, fn_, _) = confusion(detections, annotations)?;
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

/// Aggregate detection-quality report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub frames: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub f1: f64,
    /// Mean IoU over frames with both a detection and a ground-truth box;
    /// `None` when no frame has both.
    pub mean_iou: Option<f64>,
    pub median_iou: Option<f64>,
    /// Number of frames entering the IoU aggregate.
    pub matched: usize,
    /// Mean recorded per-frame seconds, over detections that carry one.
    pub mean_seconds: Option<f64>,
}

/// Evaluate detections against annotations: F1, mean/median IoU over frames
/// where both boxes exist, and the mean recorded per-frame time.
pub fn evaluate(detections: &[Detection], annotations: &[Annotation]) -> Result<EvalReport> {
    if annotations.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let (tp, fp, fn_, mut ious) = confusion(detections, annotations)?;
    let denom = 2 * tp + fp + fn_;
    let f1 = if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    };
    ious.sort_unstable_by(f64::total_cmp);
    let matched = ious.len();
    let mean_iou = (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / matched as f64);
    let median_iou = (!ious.is_empty()).then(|| {
        if matched % 2 == 1 {
            ious[matched / 2]
        } else {
            0.5 * (ious[matched / 2 - 1] + ious[matched / 2])
        }
    });
    let times: Vec<f64> = detections.iter().filter_map(|d| d.seconds).collect();
    let mean_seconds = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
    Ok(EvalReport {
        frames: annotations.len(),
        tp,
        fp,
        fn_,
        f1,
        mean_iou,
        median_iou,
        matched,
        mean_seconds,
    })
}
