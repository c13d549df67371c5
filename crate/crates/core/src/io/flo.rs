use super::{payload_len, take_payload, FormatError};
use crate::raster::Raster;

/// Middlebury sanity value; its little-endian bytes spell `PIEH`.
pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

pub fn write_flo(flow: &Raster<f32>) -> Result<Vec<u8>, FormatError> {
    if flow.channels() != 2 {
        return Err(FormatError::ChannelMismatch {
            expected: "2",
            found: flow.channels(),
        });
    }
    let dims = |v: usize| {
        i32::try_from(v).map_err(|_| FormatError::DimOverflow {
            width: flow.width() as u64,
            height: flow.height() as u64,
            channels: 2,
        })
    };
    let (w, h) = (dims(flow.width())?, dims(flow.height())?);
    let mut out = Vec::with_capacity(HEADER_LEN + flow.data().len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for v in flow.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_flo(bytes: &[u8]) -> Result<Raster<f32>, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            offset: bytes.len(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(FormatError::BadMagic {
            offset: 0,
            expected: "202021.25 (PIEH)",
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let w = i32::from_le_bytes(word(4));
    let h = i32::from_le_bytes(word(8));
    if w <= 0 || h <= 0 {
        return Err(FormatError::BadHeader {
            offset: 4,
            message: format!("non-positive dimensions {w}x{h}"),
        });
    }
    let len = payload_len(w as u64, h as u64, 2, 4)?;
    let payload = take_payload(bytes, HEADER_LEN, len)?;
    let data = payload
        .chunks_exact(4)
        .map(|s| f32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .collect();
    Ok(Raster::from_vec(w as usize, h as usize, 2, data).expect("payload length checked"))
}
