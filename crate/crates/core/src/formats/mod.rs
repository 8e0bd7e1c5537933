//! On-disk formats.
//!
//! Binary artifacts share one little-endian envelope:
//!
//! ```text
//! magic      [u8; 4]     "DLUT" | "DSET" | "DMLP"
//! version    u32
//! hash       u64         first 8 bytes of SHA-256 over everything below
//! meta_count u32         then per entry: u32 len, key bytes, u32 len, value bytes
//! body       ...         kind-specific layout
//! ```
//!
//! Loads check magic, version and hash before decoding, then re-run the
//! payload's own invariant checks.

mod artifacts;
mod csvio;
mod images;
mod maps;

pub use artifacts::{
    load_dataset, load_lut, load_weights, parse_warp_meta, save_dataset, save_lut, save_weights, warp_meta, WeightsFile,
};
pub use csvio::{
    export_data, read_spectrum_csv, write_history_csv, write_spectrum_csv, write_table_csv,
};
pub use images::{
    decode_srgb, encode_srgb, read_image, read_mask, read_pfm, write_image, write_pfm, write_png, PngDepth,
};
pub use maps::{load_param_maps, save_param_maps};

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Metadata = Vec<(String, String)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArtifactKind {
    Lut,
    Dataset,
    Weights,
}

impl ArtifactKind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            ArtifactKind::Lut => *b"DLUT",
            ArtifactKind::Dataset => *b"DSET",
            ArtifactKind::Weights => *b"DMLP",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::Lut => "LUT",
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::Weights => "weights",
        }
    }

    /// Newest layout version this build reads and writes.
    pub fn version(self) -> u32 {
        1
    }
}

/// 64-bit digest used in artifact headers.
pub fn payload_hash(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Hex SHA-256 of a file, for run metadata.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        ByteReader { bytes, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.path, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format(self.path, "metadata is not UTF-8"))
    }

    /// Bounds a declared element count by the bytes left.
    pub fn count(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem_size).is_none_or(|b| b > self.bytes.len() - self.pos) {
            return Err(Error::format(self.path, format!("declared count {n} exceeds the file size")));
        }
        Ok(n)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.path, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

/// Writes an artifact atomically (temporary file, then rename).
pub fn save_artifact(kind: ArtifactKind, meta: &Metadata, body: &[u8], path: &Path) -> Result<()> {
    let mut rest = ByteWriter::default();
    rest.u32(meta.len() as u32);
    for (k, v) in meta {
        rest.str(k);
        rest.str(v);
    }
    rest.buf.extend_from_slice(body);

    let mut out = Vec::with_capacity(rest.buf.len() + 16);
    out.extend_from_slice(&kind.magic());
    out.extend_from_slice(&kind.version().to_le_bytes());
    out.extend_from_slice(&payload_hash(&rest.buf).to_le_bytes());
    out.extend_from_slice(&rest.buf);
    write_atomic(path, &out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads and verifies an artifact, returning its metadata and body.
pub fn load_artifact(kind: ArtifactKind, path: &Path) -> Result<(Metadata, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::format(path, "too short for an artifact header"));
    }
    if bytes[..4] != kind.magic() {
        return Err(Error::format(
            path,
            format!("expected a {} file (magic {:?})", kind.name(), String::from_utf8_lossy(&kind.magic())),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version == 0 || version > kind.version() {
        return Err(Error::Version {
            path: path.to_path_buf(),
            kind: kind.name(),
            found: version,
            supported: kind.version(),
        });
    }
    let stored = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let computed = payload_hash(&bytes[16..]);
    if stored != computed {
        return Err(Error::HashMismatch { path: path.to_path_buf(), stored, computed });
    }
    let mut r = ByteReader::new(&bytes[16..], path);
    let n = r.u32()? as usize;
    let mut meta = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        meta.push((r.str()?, r.str()?));
    }
    let body = bytes[16 + r.pos..].to_vec();
    Ok((meta, body))
}

pub fn meta_get<'m>(meta: &'m Metadata, key: &str) -> Option<&'m str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}
