use super::header::HeaderReader;
use super::{payload_len, take_payload, FormatError};
use crate::raster::Raster;

/// Encodes a 1- or 3-channel float raster. Always little-endian (scale `-1.0`);
/// rows are written bottom-to-top.
pub fn write_pfm(map: &Raster<f32>) -> Result<Vec<u8>, FormatError> {
    let magic = match map.channels() {
        1 => "Pf",
        3 => "PF",
        found => {
            return Err(FormatError::ChannelMismatch {
                expected: "1 or 3",
                found,
            })
        }
    };
    let header = format!("{magic}\n{} {}\n-1.0\n", map.width(), map.height());
    let mut out = Vec::with_capacity(header.len() + map.data().len() * 4);
    out.extend_from_slice(header.as_bytes());
    for row in map.rows().collect::<Vec<_>>().into_iter().rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_pfm(bytes: &[u8]) -> Result<Raster<f32>, FormatError> {
    let mut h = HeaderReader::new(bytes, false);
    let channels = match h.magic(&["Pf", "PF"], "Pf or PF")? {
        "Pf" => 1,
        _ => 3,
    };
    let (_, width) = h.number::<u64>("width")?;
    let (_, height) = h.number::<u64>("height")?;
    let (scale_at, scale) = h.number::<f64>("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::BadHeader {
            offset: scale_at,
            message: "scale must be a non-zero finite number".into(),
        });
    }
    let little_endian = scale < 0.0;
    let start = h.end()?;
    let len = payload_len(width, height, channels, 4)?;
    let payload = take_payload(bytes, start, len)?;

    let (w, hgt, c) = (width as usize, height as usize, channels as usize);
    let row_len = w * c;
    let mut data = vec![0f32; w * hgt * c];
    for (file_row, chunk) in payload.chunks_exact(row_len * 4).enumerate() {
        let dst = &mut data[(hgt - 1 - file_row) * row_len..][..row_len];
        for (d, s) in dst.iter_mut().zip(chunk.chunks_exact(4)) {
            let b = [s[0], s[1], s[2], s[3]];
            *d = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
        }
    }
    Ok(Raster::from_vec(w, hgt, c, data).expect("payload length checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_layout() {
        let map = Raster::from_vec(1, 1, 1, vec![30.0f32]).unwrap();
        let bytes = write_pfm(&map).unwrap();
        let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
        expected.extend_from_slice(&30.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rows_are_stored_bottom_up() {
        let map = Raster::from_vec(1, 2, 1, vec![1.0f32, 2.0]).unwrap();
        let bytes = write_pfm(&map).unwrap();
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
        assert_eq!(read_pfm(&bytes).unwrap(), map);
    }

    #[test]
    fn big_endian_input_is_accepted() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
        let map = read_pfm(&bytes).unwrap();
        assert_eq!(map.data(), &[1.5, -2.0]);
    }

    #[test]
    fn three_channel_header_with_one_channel_payload_fails() {
        let mut bytes = b"PF\n2 2\n-1.0\n".to_vec();
        bytes.extend(std::iter::repeat_n(0u8, 2 * 2 * 4));
        match read_pfm(&bytes) {
            Err(FormatError::Truncated {
                offset,
                expected,
                found,
            }) => {
                assert_eq!(offset, bytes.len());
                assert_eq!(expected, 48);
                assert_eq!(found, 16);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            read_pfm(b"P6\n1 1\n255\n"),
            Err(FormatError::BadMagic { offset: 0, .. })
        ));
        assert!(matches!(
            read_pfm(b"Pf\n1 x\n-1.0\n"),
            Err(FormatError::BadHeader { offset: 5, .. })
        ));
        assert!(matches!(
            read_pfm(b"Pf\n99999999999 99999999999\n-1.0\n"),
            Err(FormatError::DimOverflow { .. }) | Err(FormatError::Truncated { .. })
        ));
        assert!(matches!(
            read_pfm(b"Pf\n1 1\n0\n0000"),
            Err(FormatError::BadHeader { .. })
        ));
        assert!(matches!(
            read_pfm(b"Pf\n0 1\n-1\n"),
            Err(FormatError::DimOverflow { .. })
        ));
    }

    #[test]
    fn nan_payloads_round_trip() {
        let vals = vec![
            f32::from_bits(0x7fc0_0001),
            f32::from_bits(0xffbf_ffff),
            f32::NAN,
            0.0,
            -0.0,
            f32::MIN_POSITIVE / 2.0,
        ];
        let map = Raster::from_vec(3, 2, 1, vals).unwrap();
        let back = read_pfm(&write_pfm(&map).unwrap()).unwrap();
        let bits = |m: &Raster<f32>| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&map));
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(w in 1usize..9, h in 1usize..9, three in any::<bool>(), seed in proptest::collection::vec(any::<u32>(), 243)) {
            let c = if three { 3 } else { 1 };
            let data: Vec<f32> = seed.iter().cycle().take(w * h * c).map(|&b| f32::from_bits(b)).collect();
            let map = Raster::from_vec(w, h, c, data).unwrap();
            let back = read_pfm(&write_pfm(&map).unwrap()).unwrap();
            prop_assert_eq!(back.width(), w);
            prop_assert_eq!(back.channels(), c);
            let a: Vec<u32> = map.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
