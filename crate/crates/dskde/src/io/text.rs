//! Line-oriented text formats: annotations, detection records, and
//! `key = value` configuration files.
//!
//! Annotations: `frame_id,label,r0,r1,c0,c1` with empty box fields for
//! vacant frames. Bounds are half-open pixel indices; a leading
//! `# bounds=inclusive` line switches the reader to inclusive bounds and
//! converts on load. Detections: `frame_id,r0,r1,c0,c1,seconds` with empty
//! box fields when nothing was detected.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::eval::{Annotation, Detection, Label};
use crate::extract::BBox;
use crate::{Error, Result};

fn parse_bbox_fields(
    fields: &[&str],
    inclusive: bool,
    path: &Path,
    line_no: usize,
) -> Result<Option<BBox>> {
    if fields.iter().all(|f| f.trim().is_empty()) {
        return Ok(None);
    }
    let mut nums = [0usize; 4];
    for (dst, field) in nums.iter_mut().zip(fields) {
        *dst = field.trim().parse::<usize>().map_err(|_| {
            Error::format(
                path,
                format!("line {line_no}: malformed box field `{field}`"),
            )
        })?;
    }
    let (r0, mut r1, c0, mut c1) = (nums[0], nums[1], nums[2], nums[3]);
    if inclusive {
        r1 += 1;
        c1 += 1;
    }
    BBox::new(r0, r1, c0, c1)
        .map(Some)
        .map_err(|e| Error::format(path, format!("line {line_no}: {e}")))
}

/// Read an annotation file. Lines are
/// `frame_id,label,r0,r1,c0,c1`; vacant frames leave the box fields empty.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    let mut inclusive = false;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if trimmed.trim_start_matches('#').trim() == "bounds=inclusive" {
                inclusive = true;
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::format(
                path,
                format!("line {line_no}: expected 6 fields, got {}", fields.len()),
            ));
        }
        let label = Label::parse(fields[1].trim())
            .map_err(|e| Error::format(path, format!("line {line_no}: {e}")))?;
        let bbox = parse_bbox_fields(&fields[2..6], inclusive, path, line_no)?;
        let ann = Annotation::new(fields[0].trim(), label, bbox)
            .map_err(|e| Error::format(path, format!("line {line_no}: {e}")))?;
        out.push(ann);
    }
    Ok(out)
}

/// Write detection records as `frame_id,r0,r1,c0,c1,seconds` under a header
/// line, leaving the box fields empty for frames without a detection.
pub fn write_detections<W: Write>(mut w: W, detections: &[Detection]) -> std::io::Result<()> {
    writeln!(w, "frame_id,r0,r1,c0,c1,seconds")?;
    for d in detections {
        match &d.bbox {
            Some(b) => writeln!(
                w,
                "{},{},{},{},{},{}",
                d.frame_id,
                b.r0,
                b.r1,
                b.c0,
                b.c1,
                d.seconds.unwrap_or(0.0)
            )?,
            None => writeln!(w, "{},,,,,{}", d.frame_id, d.seconds.unwrap_or(0.0))?,
        }
    }
    Ok(())
}

/// Read a detection CSV produced by [`write_detections`].
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if idx == 0 && trimmed.starts_with("frame_id,") {
            continue; // header
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::format(
                path,
                format!("line {line_no}: expected 6 fields, got {}", fields.len()),
            ));
        }
        let bbox = parse_bbox_fields(&fields[1..5], false, path, line_no)?;
        let seconds = {
            let f = fields[5].trim();
            if f.is_empty() {
                None
            } else {
                Some(f.parse::<f64>().map_err(|_| {
                    Error::format(path, format!("line {line_no}: malformed seconds `{f}`"))
                })?)
            }
        };
        out.push(Detection {
            frame_id: fields[0].trim().to_string(),
            bbox,
            seconds,
        });
    }
    Ok(out)
}

/// Parse a plain `key = value` configuration file: one pair per line, `#`
/// comments and blank lines ignored, later keys overriding earlier ones.
pub fn parse_key_values(content: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!(
                "config line {}: expected `key = value`, got `{trimmed}`",
                idx + 1
            ))
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}
