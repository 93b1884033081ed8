//! The `ADNARR1` array container.
//!
//! A file is one UTF-8 JSON header line terminated by `\n`, then the raw
//! little-endian `f32` payload in row-major order:
//!
//! ```text
//! {"magic":"ADNARR1","shape":[64,64],"dtype":"f32le","spacing_mm":5.0,"provenance":"synthetic"}
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use adn_core::image::{CtImage, Provenance};
use adn_core::sim::MetalMask;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &str = "ADNARR1";
pub const DTYPE: &str = "f32le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProvenanceTag {
    Synthetic,
    Ingested,
}

impl From<Provenance> for ProvenanceTag {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Synthetic => Self::Synthetic,
            Provenance::Ingested => Self::Ingested,
        }
    }
}

impl From<ProvenanceTag> for Provenance {
    fn from(p: ProvenanceTag) -> Self {
        match p {
            ProvenanceTag::Synthetic => Self::Synthetic,
            ProvenanceTag::Ingested => Self::Ingested,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    magic: String,
    shape: Vec<usize>,
    dtype: String,
    spacing_mm: f32,
    provenance: ProvenanceTag,
}

/// Everything stored alongside the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayMeta {
    pub shape: Vec<usize>,
    pub spacing_mm: f32,
    pub provenance: ProvenanceTag,
}

impl ArrayMeta {
    pub fn new(shape: &[usize], spacing_mm: f32, provenance: ProvenanceTag) -> Self {
        Self { shape: shape.to_vec(), spacing_mm, provenance }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Serializes a 2-D or 3-D array into container bytes.
pub fn encode_array(data: &[f32], meta: &ArrayMeta) -> std::result::Result<Vec<u8>, String> {
    if !(2..=3).contains(&meta.shape.len()) {
        return Err(format!("only 2-D and 3-D arrays are supported, got shape {:?}", meta.shape));
    }
    if meta.len() != data.len() {
        return Err(format!("shape {:?} holds {} values, got {}", meta.shape, meta.len(), data.len()));
    }
    let header = Header {
        magic: MAGIC.into(),
        shape: meta.shape.clone(),
        dtype: DTYPE.into(),
        spacing_mm: meta.spacing_mm,
        provenance: meta.provenance,
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| e.to_string())?;
    out.push(b'\n');
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses container bytes; `path` is only used in error messages.
pub fn decode_array(bytes: &[u8], path: &Path) -> Result<(Vec<f32>, ArrayMeta)> {
    let format = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| format("no header line".into()))?;
    let text = std::str::from_utf8(&bytes[..nl]).map_err(|e| format(format!("header is not UTF-8: {e}")))?;
    let header: Header = serde_json::from_str(text).map_err(|e| format(format!("bad header: {e}")))?;
    if header.magic != MAGIC {
        return Err(format(format!("magic is {:?}, expected {MAGIC}", header.magic)));
    }
    if header.dtype != DTYPE {
        return Err(format(format!("unsupported dtype {:?}", header.dtype)));
    }
    if !(2..=3).contains(&header.shape.len()) || header.shape.contains(&0) {
        return Err(format(format!("unsupported shape {:?}", header.shape)));
    }
    let payload = &bytes[nl + 1..];
    let n: usize = header.shape.iter().product();
    if payload.len() != n * 4 {
        return Err(Error::Corruption {
            path: path.to_path_buf(),
            msg: format!("shape {:?} needs {} payload bytes, found {}", header.shape, n * 4, payload.len()),
        });
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((data, ArrayMeta { shape: header.shape, spacing_mm: header.spacing_mm, provenance: header.provenance }))
}

/// Writes via a temporary sibling and a rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_array(path: &Path, data: &[f32], meta: &ArrayMeta) -> Result<()> {
    let bytes = encode_array(data, meta).map_err(Error::Other)?;
    write_atomic(path, &bytes)
}

pub fn read_array(path: &Path) -> Result<(Vec<f32>, ArrayMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_array(&bytes, path)
}

pub fn write_image(path: &Path, image: &CtImage) -> Result<()> {
    let meta = ArrayMeta::new(&[image.height(), image.width()], image.pixel_spacing_mm(), image.provenance().into());
    write_array(path, image.pixels(), &meta)
}

/// Reads a 2-D HU image, clamping values into the accepted HU range.
pub fn read_image(path: &Path) -> Result<CtImage> {
    let (data, meta) = read_array(path)?;
    let [h, w] = meta.shape[..] else {
        return Err(Error::Format { path: path.to_path_buf(), msg: format!("expected a 2-D image, got shape {:?}", meta.shape) });
    };
    let img = CtImage::ingest(data, h, w, meta.spacing_mm)?;
    if meta.provenance == ProvenanceTag::Synthetic {
        return Ok(CtImage::new(img.pixels().to_vec(), h, w, meta.spacing_mm, Provenance::Synthetic)?);
    }
    Ok(img)
}

/// Masks are stored as 0/1 arrays; the metal HU rides in a sibling field of the manifest.
pub fn write_mask(path: &Path, mask: &MetalMask, spacing_mm: f32) -> Result<()> {
    let data: Vec<f32> = mask.pixels().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    write_array(path, &data, &ArrayMeta::new(&[mask.height(), mask.width()], spacing_mm, ProvenanceTag::Synthetic))
}

pub fn read_mask(path: &Path, metal_hu: f32) -> Result<MetalMask> {
    let (data, meta) = read_array(path)?;
    let [h, w] = meta.shape[..] else {
        return Err(Error::Format { path: path.to_path_buf(), msg: format!("expected a 2-D mask, got shape {:?}", meta.shape) });
    };
    Ok(MetalMask::new(data.iter().map(|&v| v > 0.5).collect(), h, w, metal_hu)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_one_json_line() {
        let meta = ArrayMeta::new(&[2, 3], 0.5, ProvenanceTag::Synthetic);
        let bytes = encode_array(&[0.0; 6], &meta).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(v["magic"], "ADNARR1");
        assert_eq!(v["dtype"], "f32le");
        assert_eq!(v["provenance"], "synthetic");
        assert_eq!(bytes.len(), nl + 1 + 24);
    }

    #[test]
    fn rejects_bad_rank_on_write() {
        let meta = ArrayMeta::new(&[6], 1.0, ProvenanceTag::Ingested);
        assert!(encode_array(&[0.0; 6], &meta).is_err());
        let meta = ArrayMeta::new(&[2, 2], 1.0, ProvenanceTag::Ingested);
        assert!(encode_array(&[0.0; 5], &meta).is_err());
    }
}
