//! Fitted-model persistence.
//!
//! Layout (all little-endian): magic `DSKD`, format version (u16), variant
//! flag (u16: GPA-DS = 1, GPA-CD = 2), `p`, `q`, `G*` (u32 each), `h`, `h*`,
//! `sigma_hat` (f64 each), grid seed (u64), then `G*` grid points as f64 in
//! ascending order and the `G* * p * q` table as f32, slice-major then
//! row-major. Table values are stored in single precision to halve the model
//! size; the induced query error is bounded by the per-entry relative
//! quantization and covered by tests.

use std::fs;
use std::path::Path;

use ndarray::Array3;

use crate::bandwidth::BandwidthPlan;
use crate::estimators::{GpaTable, Variant};
use crate::{Error, Result};

const MAGIC: [u8; 4] = *b"DSKD";
const VERSION: u16 = 1;

fn variant_flag(v: Variant) -> u16 {
    match v {
        Variant::GpaDs => 1,
        Variant::GpaCd => 2,
    }
}

/// Serialize a fitted table. The frame count `n` of the fitting stack is not
/// part of the format; a loaded plan reports `n = 0`.
pub fn save_model(table: &GpaTable, path: impl AsRef<Path>) -> Result<()> {
    let (g, p, q) = (table.g_star(), table.p(), table.q());
    let mut out = Vec::with_capacity(4 + 2 + 2 + 12 + 24 + 8 + 8 * g + 4 * g * p * q);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&variant_flag(table.variant()).to_le_bytes());
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&(q as u32).to_le_bytes());
    out.extend_from_slice(&(g as u32).to_le_bytes());
    out.extend_from_slice(&table.plan().h().to_le_bytes());
    out.extend_from_slice(&table.plan().h_star().to_le_bytes());
    out.extend_from_slice(&table.plan().sigma_hat().to_le_bytes());
    out.extend_from_slice(&table.seed().to_le_bytes());
    for &x in table.grid() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &v in table.table().iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Model(format!(
                "truncated payload: need {} bytes at offset {}, file holds {}",
                n,
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Load a fitted table, validating magic, version, declared sizes against
/// the payload length, and the grid ordering.
pub fn load_model(path: impl AsRef<Path>) -> Result<GpaTable> {
    let bytes = fs::read(path.as_ref())?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::Model(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::Model(format!(
            "unsupported format version {version} (supported: {VERSION})"
        )));
    }
    let variant = match cur.u16()? {
        1 => Variant::GpaDs,
        2 => Variant::GpaCd,
        other => return Err(Error::Model(format!("unknown variant flag {other}"))),
    };
    let p = cur.u32()? as usize;
    let q = cur.u32()? as usize;
    let g = cur.u32()? as usize;
    let h = cur.f64()?;
    let h_star = cur.f64()?;
    let sigma_hat = cur.f64()?;
    let seed = cur.u64()?;

    let expected = cur.pos + 8 * g + 4 * g * p * q;
    if bytes.len() != expected {
        return Err(Error::Model(format!(
            "declared sizes need {expected} bytes, file holds {}",
            bytes.len()
        )));
    }

    let mut grid = Vec::with_capacity(g);
    for _ in 0..g {
        grid.push(cur.f64()?);
    }
    let mut values = Vec::with_capacity(g * p * q);
    for chunk in cur.take(4 * g * p * q)?.chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    let table = Array3::from_shape_vec((g, p, q), values)
        .map_err(|e| Error::Model(format!("table shape: {e}")))?;
    let plan = BandwidthPlan::new(h, h_star, sigma_hat, 0, p * q)
        .map_err(|e| Error::Model(format!("invalid stored plan: {e}")))?;
    GpaTable::from_parts(grid, table, plan, variant, seed)
        .map_err(|e| Error::Model(format!("invalid stored table: {e}")))
}
