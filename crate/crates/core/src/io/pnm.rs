//! Binary PGM (P5) and PPM (P6) images with the plane extent kept in a
//! header comment.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{HistogramImage, ImageMode};

const WHAT: &str = "PGM/PPM image";

pub fn encode_pnm(img: &HistogramImage) -> Result<Vec<u8>> {
    let expected = img.rows * img.cols * img.channels();
    if img.pixels.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: img.pixels.len(),
        });
    }
    let magic = match img.mode {
        ImageMode::Gray => "P5",
        ImageMode::Color => "P6",
    };
    let e = &img.extent;
    let header = format!(
        "{magic}\n{} {}\n# extent={} {} {} {}\n# samples={} {}\n255\n",
        img.cols, img.rows, e.i_min, e.i_max, e.q_min, e.q_max, img.n_used, img.n_discarded
    );
    let mut out = header.into_bytes();
    out.extend_from_slice(&img.pixels);
    Ok(out)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    comments: Vec<String>,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let end = self.bytes[self.pos..]
                    .iter()
                    .position(|&c| c == b'\n')
                    .map_or(self.bytes.len(), |off| self.pos + off);
                self.comments
                    .push(String::from_utf8_lossy(&self.bytes[self.pos + 1..end]).trim().to_string());
                self.pos = end;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::malformed(WHAT, "header ends early"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::malformed(WHAT, "non-ASCII header"))
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::malformed(WHAT, format!("expected a number, got {t:?}")))
    }
}

fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments
        .iter()
        .find_map(|c| c.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
}

pub fn decode_pnm(bytes: &[u8]) -> Result<HistogramImage> {
    let mut h = Header {
        bytes,
        pos: 0,
        comments: Vec::new(),
    };
    let mode = match h.token()? {
        "P5" => ImageMode::Gray,
        "P6" => ImageMode::Color,
        other => return Err(Error::malformed(WHAT, format!("unsupported magic {other:?}"))),
    };
    let cols = h.number()?;
    let rows = h.number()?;
    let maxval = h.number()?;
    if maxval != 255 {
        return Err(Error::malformed(WHAT, format!("maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::malformed(WHAT, "missing raster separator")),
    }
    let raster = &bytes[h.pos..];
    let expected = rows * cols * mode.channels();
    if raster.len() != expected {
        return Err(Error::malformed(
            WHAT,
            format!("raster has {} bytes, expected {expected}", raster.len()),
        ));
    }

    let extent = comment_value(&h.comments, "extent")
        .ok_or_else(|| Error::malformed(WHAT, "missing extent comment"))?;
    let extent = super::parse_extent(extent)?;

    let (n_used, n_discarded) = match comment_value(&h.comments, "samples") {
        None => (0, 0),
        Some(s) => {
            let v: Vec<usize> = s
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::malformed(WHAT, format!("bad samples comment {s:?}")))?;
            match v[..] {
                [u, d] => (u, d),
                _ => return Err(Error::malformed(WHAT, format!("bad samples comment {s:?}"))),
            }
        }
    };

    Ok(HistogramImage {
        rows,
        cols,
        mode,
        pixels: raster.to_vec(),
        extent,
        n_used,
        n_discarded,
    })
}

/// Writes P5 for grayscale images and P6 for color images.
pub fn write_image_pgm(img: &HistogramImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pnm(img)?).map_err(|e| Error::io(path, e))
}

pub fn read_image_pgm(path: impl AsRef<Path>) -> Result<HistogramImage> {
    let path = path.as_ref();
    decode_pnm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
