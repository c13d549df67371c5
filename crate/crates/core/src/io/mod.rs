//! Bit-exact readers and writers for every on-disk format plus the dataset manifest.
//!
//! * float maps (`.pfm`): `Pf` (1 channel) / `PF` (3 channels), little-endian, rows bottom-to-top
//! * optical flow (`.flo`): Middlebury layout, little-endian
//! * RGB images (`.ppm`, P6 8-bit) and single-channel masks (`.pgm`, P5 8- or 16-bit)
//! * the JSON manifest describing a rendered scene

mod flo;
mod header;
mod manifest;
mod pfm;
mod pnm;

pub use flo::{read_flo, write_flo, FLO_MAGIC};
pub(crate) use manifest::sort_keys as sort_json_keys;
pub use manifest::{
    read_manifest, write_manifest, FrameCameras, FrameRecord, Manifest, RunStatus, MANIFEST_VERSION,
};
pub use pfm::{read_pfm, write_pfm};
pub use pnm::{read_pgm16, read_pgm8, read_pnm, read_ppm, write_pgm16, write_pgm8, write_ppm, Pnm};

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte {offset}: expected {expected}, found {found:?}")]
    BadMagic {
        offset: usize,
        expected: &'static str,
        found: String,
    },
    #[error("malformed header at byte {offset}: {message}")]
    BadHeader { offset: usize, message: String },
    #[error("dimensions {width}x{height}x{channels} overflow or are invalid")]
    DimOverflow {
        width: u64,
        height: u64,
        channels: u64,
    },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("unexpected trailing data at byte {offset} ({extra} bytes)")]
    TrailingData { offset: usize, extra: usize },
    #[error("maxval {found} at byte {offset} is not supported here (expected {expected})")]
    MaxvalMismatch {
        offset: usize,
        expected: &'static str,
        found: u32,
    },
    #[error("raster has {found} channels, format requires {expected}")]
    ChannelMismatch {
        expected: &'static str,
        found: usize,
    },
    #[error("sample value {value} exceeds maxval {maxval}")]
    SampleRange { value: u32, maxval: u32 },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest version {found:?} is incompatible with {expected:?}")]
    IncompatibleVersion {
        expected: &'static str,
        found: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads a whole file, attaching the path to any I/O error.
pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a whole file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let wrap = |source| FormatError::File {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(wrap)?;
    }
    std::fs::write(path, bytes).map_err(wrap)
}

pub(crate) fn payload_len(
    width: u64,
    height: u64,
    channels: u64,
    bytes_per_sample: u64,
) -> Result<usize, FormatError> {
    let overflow = || FormatError::DimOverflow {
        width,
        height,
        channels,
    };
    if width == 0 || height == 0 {
        return Err(overflow());
    }
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .and_then(|n| n.checked_mul(bytes_per_sample))
        .ok_or_else(overflow)?;
    usize::try_from(n).map_err(|_| overflow())
}

pub(crate) fn take_payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], FormatError> {
    let available = bytes.len().saturating_sub(offset);
    if available < len {
        return Err(FormatError::Truncated {
            offset: bytes.len(),
            expected: len,
            found: available,
        });
    }
    if available > len {
        return Err(FormatError::TrailingData {
            offset: offset + len,
            extra: available - len,
        });
    }
    Ok(&bytes[offset..])
}
