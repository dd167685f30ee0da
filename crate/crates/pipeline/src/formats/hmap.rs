//! Heatmap files: magic `HMAP`, u16 version, u32 height, u32 width, then
//! row-major little-endian f32 values.

use std::path::Path;

use kdloc_core::localization::Heatmap;

use super::Reader;
use crate::error::{self, Error, Result};

pub const MAGIC: &[u8; 4] = b"HMAP";
pub const VERSION: u16 = 1;

pub fn encode(h: &Heatmap) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 4 * h.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(h.height() as u32).to_le_bytes());
    out.extend_from_slice(&(h.width() as u32).to_le_bytes());
    for v in h.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Heatmap, String> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err("not a heatmap (bad magic)".into());
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(format!("unsupported heatmap version {version}"));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let n = h.checked_mul(w).ok_or("heatmap dimensions overflow")?;
    if r.remaining() != 4 * n {
        return Err(format!("expected {} value bytes for {h}x{w}, found {}", 4 * n, r.remaining()));
    }
    let values = (0..n).map(|_| r.array().map(|b| f32::from_le_bytes(b) as f64)).collect::<std::result::Result<_, _>>()?;
    Heatmap::from_values(h, w, values).map_err(|e| e.to_string())
}

pub fn save(h: &Heatmap, path: &Path) -> Result<()> {
    error::write(path, &encode(h))
}

pub fn load(path: &Path) -> Result<Heatmap> {
    decode(&error::read(path)?).map_err(|m| Error::format(path, m))
}
