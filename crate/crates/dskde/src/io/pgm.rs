//! Binary (P5) PGM reading and writing, plus directory ingestion into a
//! [`FrameStack`]. Pixel bytes map to `[0, 1]` by `v / 255`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::estimators::FrameStack;
use crate::{Error, Result};

/// Pull the next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(path, "truncated header"));
    }
    Ok(&bytes[start..*pos])
}

fn parse_usize(token: &[u8], what: &str, path: &Path) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::format(path, format!("malformed {what} field")))
}

/// Parse one 8-bit binary PGM image from raw bytes.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos, path)?;
    if magic != b"P5" {
        return Err(Error::format(path, "not a binary PGM (expected magic P5)"));
    }
    let width = parse_usize(next_token(bytes, &mut pos, path)?, "width", path)?;
    let height = parse_usize(next_token(bytes, &mut pos, path)?, "height", path)?;
    let maxval = parse_usize(next_token(bytes, &mut pos, path)?, "maxval", path)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            path,
            format!("maxval {maxval} is not 8-bit (must be 1..=255)"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(path, "empty image"));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(path, "missing header terminator"));
    }
    pos += 1;
    let need = width * height;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(Error::format(
            path,
            format!("payload holds {} bytes, header declares {need}", payload.len()),
        ));
    }
    let maxval = maxval as f64;
    let values: Vec<f64> = payload[..need].iter().map(|&b| b as f64 / maxval).collect();
    Ok(Array2::from_shape_vec((height, width), values).expect("shape matches header"))
}

/// Read one 8-bit binary PGM file; rows index the image height.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_pgm(&bytes, path)
}

/// Write a `[0, 1]` map as an 8-bit binary PGM, quantizing by
/// `round(v * 255)` with clamping.
pub fn write_pgm(path: impl AsRef<Path>, map: &Array2<f64>) -> Result<()> {
    let (height, width) = map.dim();
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height);
    for &v in map.iter() {
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Collect the PGM frames of a directory (or an explicit file list) into a
/// stack: frames are ordered by sorted filename and every `stride`-th one is
/// taken. All frames must share dimensions.
pub fn load_frames(dir_or_files: &[PathBuf], stride: usize) -> Result<FrameStack> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in dir_or_files {
        if entry.is_dir() {
            for item in fs::read_dir(entry)? {
                let path = item?.path();
                if path.is_file() {
                    files.push(path);
                }
            }
        } else {
            files.push(entry.clone());
        }
    }
    files.sort();
    let selected: Vec<&PathBuf> = files.iter().step_by(stride).collect();
    if selected.is_empty() {
        return Err(Error::EmptyStack);
    }
    let mut frames = Vec::with_capacity(selected.len());
    let mut dims: Option<(usize, usize)> = None;
    for path in selected {
        let frame = read_pgm(path)?;
        match dims {
            None => dims = Some(frame.dim()),
            Some(d) if d != frame.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", d.0, d.1),
                    actual: format!("{}x{} in {}", frame.dim().0, frame.dim().1, path.display()),
                });
            }
            _ => {}
        }
        frames.push(frame);
    }
    FrameStack::from_frames(frames)
}
