//! File formats: raw captures, histogram images, manifests and model files.

mod manifest;
mod model_file;
mod pnm;
mod raw;

pub use manifest::{DatasetManifest, Label, ManifestEntry, MANIFEST_VERSION};
pub use model_file::{load_model, parse_model, render_model, save_model, MODEL_VERSION, TAU_TOLERANCE};
pub use pnm::{decode_pnm, encode_pnm, read_image_pgm, write_image_pgm};
pub use raw::{decode_raw_iq, encode_raw_iq, read_raw_iq, write_raw_iq, RawFormat};

use crate::error::{Error, Result};
use crate::imaging::{ExtentPolicy, PlaneExtent};

/// `i_min i_max q_min q_max`, shortest round-trip decimal form.
pub fn format_extent(e: &PlaneExtent) -> String {
    format!("{} {} {} {}", e.i_min, e.i_max, e.q_min, e.q_max)
}

pub fn parse_extent(s: &str) -> Result<PlaneExtent> {
    let bad = || Error::malformed("extent", format!("expected four numbers, got {s:?}"));
    let v: Vec<f64> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    match v[..] {
        [a, b, c, d] => PlaneExtent::new(a, b, c, d),
        _ => Err(bad()),
    }
}

/// `fixed <extent>` or `auto <percentile> <margin>`.
pub fn format_policy(p: &ExtentPolicy) -> String {
    match p {
        ExtentPolicy::Fixed(e) => format!("fixed {}", format_extent(e)),
        ExtentPolicy::AutoFromTraining { percentile, margin } => format!("auto {percentile} {margin}"),
    }
}

pub fn parse_policy(s: &str) -> Result<ExtentPolicy> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("fixed") {
        return Ok(ExtentPolicy::Fixed(parse_extent(rest)?));
    }
    if let Some(rest) = s.strip_prefix("auto") {
        let v: Vec<f64> = rest
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::malformed("extent policy", s.to_string()))?;
        if let [percentile, margin] = v[..] {
            return Ok(ExtentPolicy::AutoFromTraining { percentile, margin });
        }
    }
    Err(Error::malformed("extent policy", s.to_string()))
}
