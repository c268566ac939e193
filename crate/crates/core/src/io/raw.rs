use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{IqRecording, IqSample};

/// On-disk layout of a raw capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RawFormat {
    /// `(i, q)` pairs of IEEE-754 single precision floats, little-endian, I first.
    #[default]
    InterleavedFloat32Le,
}

/// Decodes interleaved little-endian `f32` pairs.
pub fn decode_raw_iq(bytes: &[u8], format: RawFormat) -> Result<Vec<IqSample>> {
    let RawFormat::InterleavedFloat32Le = format;
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::TruncatedIq { len: bytes.len() as u64 });
    }
    bytes
        .chunks_exact(8)
        .enumerate()
        .map(|(index, c)| {
            let i = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let q = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            if i.is_finite() && q.is_finite() {
                Ok(IqSample::new(i as f64, q as f64))
            } else {
                Err(Error::NonFiniteSample { index })
            }
        })
        .collect()
}

/// Encodes samples as interleaved little-endian `f32` pairs. Values are
/// rounded to single precision, so only `f32`-representable recordings
/// round-trip bit for bit.
pub fn encode_raw_iq(samples: &[IqSample], format: RawFormat) -> Result<Vec<u8>> {
    let RawFormat::InterleavedFloat32Le = format;
    let mut out = Vec::with_capacity(samples.len() * 8);
    for (index, s) in samples.iter().enumerate() {
        let (i, q) = (s.i as f32, s.q as f32);
        if !(i.is_finite() && q.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        out.extend_from_slice(&i.to_le_bytes());
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

pub fn read_raw_iq(path: impl AsRef<Path>, format: RawFormat) -> Result<IqRecording> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(IqRecording::from_samples(decode_raw_iq(&bytes, format)?))
}

pub fn write_raw_iq(rec: &IqRecording, path: impl AsRef<Path>, format: RawFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_raw_iq(&rec.samples, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: RawFormat = RawFormat::InterleavedFloat32Le;

    #[test]
    fn byte_layout() {
        assert_eq!(
            encode_raw_iq(&[IqSample::new(0.5, 0.25)], F).unwrap(),
            vec![0x00, 0x00, 0x00, 0x3F, 0x00, 0x00, 0x80, 0x3E]
        );
        let bytes = [0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x80, 0xBF];
        assert_eq!(decode_raw_iq(&bytes, F).unwrap(), vec![IqSample::new(1.0, -1.0)]);
    }

    #[test]
    fn empty_and_truncated() {
        assert!(decode_raw_iq(&[], F).unwrap().is_empty());
        assert!(encode_raw_iq(&[], F).unwrap().is_empty());
        assert!(matches!(decode_raw_iq(&[0; 12], F), Err(Error::TruncatedIq { len: 12 })));
    }

    #[test]
    fn non_finite_reports_index() {
        let mut bytes = encode_raw_iq(&[IqSample::new(1.0, 2.0); 3], F).unwrap();
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_raw_iq(&bytes, F), Err(Error::NonFiniteSample { index: 2 })));
    }
}
