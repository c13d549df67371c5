use super::header::HeaderReader;
use super::{payload_len, take_payload, FormatError};
use crate::raster::Raster;

/// A decoded P5/P6 image.
#[derive(Debug, Clone, PartialEq)]
pub enum Pnm {
    Gray8(Raster<u8>),
    Gray16(Raster<u16>),
    Rgb8(Raster<u8>),
}

impl Pnm {
    pub fn width(&self) -> usize {
        match self {
            Pnm::Gray8(r) | Pnm::Rgb8(r) => r.width(),
            Pnm::Gray16(r) => r.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Pnm::Gray8(r) | Pnm::Rgb8(r) => r.height(),
            Pnm::Gray16(r) => r.height(),
        }
    }
}

/// Parses binary PGM (P5) or PPM (P6). Maxval up to 255 yields 8-bit samples,
/// up to 65535 big-endian 16-bit samples (PPM only supports 8-bit here).
pub fn read_pnm(bytes: &[u8]) -> Result<Pnm, FormatError> {
    let mut h = HeaderReader::new(bytes, true);
    let magic = h.magic(&["P5", "P6"], "P5 or P6")?;
    let (_, width) = h.number::<u64>("width")?;
    let (_, height) = h.number::<u64>("height")?;
    let (maxval_at, maxval) = h.number::<u32>("maxval")?;
    let start = h.end()?;
    if maxval == 0 || maxval > 65535 {
        return Err(FormatError::MaxvalMismatch {
            offset: maxval_at,
            expected: "1..=65535",
            found: maxval,
        });
    }
    let (w, hh) = (width as usize, height as usize);
    match magic {
        "P6" => {
            if maxval > 255 {
                return Err(FormatError::MaxvalMismatch {
                    offset: maxval_at,
                    expected: "<= 255 for P6",
                    found: maxval,
                });
            }
            let payload = take_payload(bytes, start, payload_len(width, height, 3, 1)?)?;
            check_range(payload.iter().map(|&b| b as u32), maxval)?;
            Ok(Pnm::Rgb8(
                Raster::from_vec(w, hh, 3, payload.to_vec()).expect("length checked"),
            ))
        }
        _ if maxval <= 255 => {
            let payload = take_payload(bytes, start, payload_len(width, height, 1, 1)?)?;
            check_range(payload.iter().map(|&b| b as u32), maxval)?;
            Ok(Pnm::Gray8(
                Raster::from_vec(w, hh, 1, payload.to_vec()).expect("length checked"),
            ))
        }
        _ => {
            let payload = take_payload(bytes, start, payload_len(width, height, 1, 2)?)?;
            let data: Vec<u16> = payload
                .chunks_exact(2)
                .map(|s| u16::from_be_bytes([s[0], s[1]]))
                .collect();
            check_range(data.iter().map(|&v| v as u32), maxval)?;
            Ok(Pnm::Gray16(
                Raster::from_vec(w, hh, 1, data).expect("length checked"),
            ))
        }
    }
}

fn check_range(samples: impl Iterator<Item = u32>, maxval: u32) -> Result<(), FormatError> {
    match samples.into_iter().find(|&v| v > maxval) {
        Some(value) => Err(FormatError::SampleRange { value, maxval }),
        None => Ok(()),
    }
}

pub fn write_ppm(image: &Raster<u8>) -> Result<Vec<u8>, FormatError> {
    if image.channels() != 3 {
        return Err(FormatError::ChannelMismatch {
            expected: "3",
            found: image.channels(),
        });
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    Ok(out)
}

/// Strict P6 reader: only maxval 255 is accepted.
pub fn read_ppm(bytes: &[u8]) -> Result<Raster<u8>, FormatError> {
    match read_pnm(bytes)? {
        Pnm::Rgb8(r) => {
            require_maxval(bytes, 255, "255")?;
            Ok(r)
        }
        _ => Err(FormatError::BadMagic {
            offset: 0,
            expected: "P6",
            found: "P5".into(),
        }),
    }
}

pub fn write_pgm8(image: &Raster<u8>) -> Result<Vec<u8>, FormatError> {
    single_channel(image.channels())?;
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    Ok(out)
}

/// Strict 8-bit P5 reader (maxval 255).
pub fn read_pgm8(bytes: &[u8]) -> Result<Raster<u8>, FormatError> {
    match read_pnm(bytes)? {
        Pnm::Gray8(r) => {
            require_maxval(bytes, 255, "255")?;
            Ok(r)
        }
        Pnm::Gray16(_) => Err(FormatError::MaxvalMismatch {
            offset: 0,
            expected: "255",
            found: 65535,
        }),
        Pnm::Rgb8(_) => Err(FormatError::BadMagic {
            offset: 0,
            expected: "P5",
            found: "P6".into(),
        }),
    }
}

/// 16-bit P5 with maxval 65535, samples big-endian.
pub fn write_pgm16(image: &Raster<u16>) -> Result<Vec<u8>, FormatError> {
    single_channel(image.channels())?;
    let mut out = format!("P5\n{} {}\n65535\n", image.width(), image.height()).into_bytes();
    for v in image.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

/// Strict 16-bit P5 reader (maxval 65535).
pub fn read_pgm16(bytes: &[u8]) -> Result<Raster<u16>, FormatError> {
    match read_pnm(bytes)? {
        Pnm::Gray16(r) => {
            require_maxval(bytes, 65535, "65535")?;
            Ok(r)
        }
        Pnm::Gray8(_) => Err(FormatError::MaxvalMismatch {
            offset: 0,
            expected: "65535",
            found: 255,
        }),
        Pnm::Rgb8(_) => Err(FormatError::BadMagic {
            offset: 0,
            expected: "P5",
            found: "P6".into(),
        }),
    }
}

fn single_channel(found: usize) -> Result<(), FormatError> {
    if found == 1 {
        Ok(())
    } else {
        Err(FormatError::ChannelMismatch {
            expected: "1",
            found,
        })
    }
}

fn require_maxval(bytes: &[u8], expected: u32, label: &'static str) -> Result<(), FormatError> {
    let mut h = HeaderReader::new(bytes, true);
    h.magic(&["P5", "P6"], "P5 or P6")?;
    h.token("width")?;
    h.token("height")?;
    let (offset, found) = h.number::<u32>("maxval")?;
    if found != expected {
        return Err(FormatError::MaxvalMismatch {
            offset,
            expected: label,
            found,
        });
    }
    Ok(())
}
