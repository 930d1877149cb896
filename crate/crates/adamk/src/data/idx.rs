//! IDX container format (the MNIST distribution format).
//!
//! Big-endian throughout: images carry magic 0x00000803 followed by the
//! dimensions [n, rows, cols] as 32-bit words and then n*rows*cols unsigned
//! bytes; labels carry magic 0x00000801, [n], then n bytes. Paths ending in
//! `.gz` are compressed transparently in both directions.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::ioutil;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Undecoded image payload: `pixels` holds n*rows*cols bytes row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub pixels: Vec<u8>,
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
}

fn is_gz(path: &Path) -> bool {
    path.extension().map_or(false, |e| e == "gz")
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let bytes = ioutil::read_bytes(path)?;
    if !is_gz(path) {
        return Ok(bytes);
    }
    let mut out = Vec::new();
    GzDecoder::new(bytes.as_slice())
        .read_to_end(&mut out)
        .map_err(|e| Error::data(format!("{}: gzip decode failed: {e}", path.display())))?;
    Ok(out)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    if !is_gz(path) {
        return ioutil::atomic_write(path, bytes);
    }
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes)
        .and_then(|_| enc.finish())
        .map_err(|e| Error::data(format!("{}: gzip encode failed: {e}", path.display())))
        .and_then(|gz| ioutil::atomic_write(path, &gz))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn u32_be(&mut self, field: &str) -> Result<u32> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(Error::data(format!(
                "{}: truncated before {field} (need {end} bytes, file has {})",
                self.path.display(),
                self.bytes.len()
            )));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..end].try_into().expect("4 bytes"));
        self.pos = end;
        Ok(v)
    }

    fn payload(&mut self, expected: usize, field: &str) -> Result<&'a [u8]> {
        let got = self.bytes.len() - self.pos;
        if got != expected {
            return Err(Error::data(format!(
                "{}: {field} payload is {got} bytes, expected {expected}",
                self.path.display()
            )));
        }
        Ok(&self.bytes[self.pos..])
    }
}

pub fn read_idx_images(path: &Path) -> Result<RawImages> {
    let bytes = read_maybe_gz(path)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let magic = cur.u32_be("image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::data(format!(
            "{}: image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}",
            path.display()
        )));
    }
    let n = cur.u32_be("image count")? as usize;
    let rows = cur.u32_be("image rows")? as usize;
    let cols = cur.u32_be("image cols")? as usize;
    let pixels = cur.payload(n * rows * cols, "image")?.to_vec();
    Ok(RawImages {
        pixels,
        n,
        rows,
        cols,
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let magic = cur.u32_be("label magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::data(format!(
            "{}: label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}",
            path.display()
        )));
    }
    let n = cur.u32_be("label count")? as usize;
    Ok(cur.payload(n, "label")?.to_vec())
}

pub fn write_idx_images(path: &Path, raw: &RawImages) -> Result<()> {
    if raw.pixels.len() != raw.n * raw.rows * raw.cols {
        return Err(Error::data(format!(
            "image buffer is {} bytes, expected {}",
            raw.pixels.len(),
            raw.n * raw.rows * raw.cols
        )));
    }
    let mut out = Vec::with_capacity(16 + raw.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(raw.n as u32).to_be_bytes());
    out.extend_from_slice(&(raw.rows as u32).to_be_bytes());
    out.extend_from_slice(&(raw.cols as u32).to_be_bytes());
    out.extend_from_slice(&raw.pixels);
    write_maybe_gz(path, &out)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    write_maybe_gz(path, &out)
}
