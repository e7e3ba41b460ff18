//! Portable float map (PFM) reading and writing.
//!
//! Header: `Pf` (1 channel) or `PF` (3 channels), then width and height, then
//! a scale whose sign encodes endianness (negative: little-endian). Rows are
//! stored bottom-to-top; buffers in memory are always top-down.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Parse a PFM byte stream.
pub fn decode_pfm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };

    let magic_at = cursor.skip_ws();
    let magic = cursor.token()?;
    let channels = match magic {
        b"Pf" => 1,
        b"PF" => 3,
        _ => return Err(Error::format(magic_at, "expected PFM magic 'Pf' or 'PF'")),
    };
    let width = cursor.number::<usize>("width")?;
    let height = cursor.number::<usize>("height")?;
    let scale = cursor.number::<f64>("scale")?;
    if width == 0 || height == 0 {
        return Err(Error::format(cursor.pos, "zero image dimension"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(cursor.pos, "scale must be finite and nonzero"));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::format(cursor.pos, "missing whitespace after scale")),
    }
    let little_endian = scale < 0.0;

    let start = cursor.pos;
    let row_len = width * channels;
    let expected = row_len
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(start, "image dimensions overflow"))?;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {}", payload.len()),
        ));
    }

    let mut data = vec![0.0; row_len * height];
    for (file_row, chunk) in payload[..expected].chunks_exact(row_len * 4).enumerate() {
        let y = height - 1 - file_row;
        let dst = &mut data[y * row_len..(y + 1) * row_len];
        for (v, b) in dst.iter_mut().zip(chunk.chunks_exact(4)) {
            let raw = [b[0], b[1], b[2], b[3]];
            *v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            } as f64;
        }
    }
    ImageBuffer::new(width, height, channels, data)
}

/// Serialize as little-endian PFM with scale -1. Samples are narrowed to `f32`.
pub fn encode_pfm(buf: &ImageBuffer) -> Vec<u8> {
    let magic = if buf.channels() == 3 { "PF" } else { "Pf" };
    let header = format!("{magic}\n{} {}\n-1.0\n", buf.width(), buf.height());
    let mut out = Vec::with_capacity(header.len() + buf.data().len() * 4);
    out.extend_from_slice(header.as_bytes());
    for y in (0..buf.height()).rev() {
        for &v in buf.row(y) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

/// Read a PFM that must have `channels` channels.
pub fn read_pfm_channels(path: impl AsRef<Path>, channels: usize) -> Result<ImageBuffer> {
    let img = read_pfm(path)?;
    if img.channels() != channels {
        return Err(Error::format(
            0,
            format!("expected {channels}-channel PFM, found {}", img.channels()),
        ));
    }
    Ok(img)
}

pub fn write_pfm(path: impl AsRef<Path>, buf: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pfm(buf)).map_err(|e| Error::io(path, e))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_ws(&mut self) -> usize {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.pos
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        let start = self.skip_ws();
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, "unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let start = self.skip_ws();
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("invalid {what} in header")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn big_and_little_endian() {
        let mut le = b"Pf\n2 1\n-1.0\n".to_vec();
        le.extend_from_slice(&1.5f32.to_le_bytes());
        le.extend_from_slice(&(-2.25f32).to_le_bytes());
        let img = decode_pfm(&le).unwrap();
        assert_eq!(img.data(), &[1.5, -2.25]);

        let mut be = b"Pf 2 1 1.0\n".to_vec();
        be.extend_from_slice(&1.5f32.to_be_bytes());
        be.extend_from_slice(&(-2.25f32).to_be_bytes());
        assert_eq!(decode_pfm(&be).unwrap(), img);
    }

    #[test]
    fn rows_are_flipped() {
        let img = ImageBuffer::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let bytes = encode_pfm(&img);
        let header_len = bytes.len() - 8;
        assert_eq!(&bytes[header_len..header_len + 4], &2.0f32.to_le_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap(), img);
    }

    #[test]
    fn malformed_headers() {
        let err = decode_pfm(b"P6\n1 1\n-1\n\0\0\0\0").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
        let err = decode_pfm(b"Pf\nx 1\n-1\n").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 3, .. }));
        assert!(decode_pfm(b"Pf\n1 1\n0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n1 1").is_err());
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = b"Pf\n2 2\n-1.0\n\0\0\0\0\0\0";
        match decode_pfm(bytes).unwrap_err() {
            Error::Format { offset, message } => {
                assert_eq!(offset, bytes.len());
                assert!(message.contains("truncated"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn channel_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pfm");
        write_pfm(&path, &ImageBuffer::filled(2, 2, 3, 0.5)).unwrap();
        assert_eq!(read_pfm(&path).unwrap().channels(), 3);
        assert!(matches!(
            read_pfm_channels(&path, 1),
            Err(Error::Format { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            w in 1usize..12, h in 1usize..12, three in any::<bool>(), seed in any::<u32>(),
        ) {
            let c = if three { 3 } else { 1 };
            let data: Vec<f64> = (0..w * h * c)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 7919) & 0xbf7f_ffff) as f64)
                .collect();
            let img = ImageBuffer::new(w, h, c, data).unwrap();
            let bytes = encode_pfm(&img);
            let back = decode_pfm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(encode_pfm(&back), bytes);
        }
    }
}
