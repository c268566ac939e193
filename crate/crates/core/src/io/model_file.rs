//! Text serialization of a trained detector.
//!
//! One `key = value` record per line. Scalars and vectors are written with
//! 17 significant digits so every `f64` survives a round trip. Weight
//! matrices are written one row per line: `ae.enc_weights.<j>` holds the `d`
//! input weights of hidden unit `j`, `ae.dec_weights.<t>` holds the `K`
//! weights feeding output `t`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::autoenc::{AutoencoderModel, DetectorModel, THRESHOLD_STD_MULTIPLIER};
use crate::error::{Error, Result};
use crate::imaging::{ImageConfig, ImageMode};

use super::{format_extent, format_policy, parse_extent, parse_policy};

pub const MODEL_VERSION: &str = "bloodhound-model/1";
const WHAT: &str = "model file";
/// Relative tolerance for the stored threshold against its statistics.
pub const TAU_TOLERANCE: f64 = 1e-9;

fn floats(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

pub fn render_model(m: &DetectorModel, comments: &[String]) -> Result<String> {
    m.autoencoder.validate()?;
    check_tau(m)?;
    let ae = &m.autoencoder;
    let (d, k) = (ae.d, ae.k_hidden);
    let mut s = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(s, "# {line}");
        }
    }
    let _ = writeln!(s, "format_version = {MODEL_VERSION}");
    let ic = &m.image_config;
    let _ = writeln!(s, "image.n = {}", ic.n);
    let _ = writeln!(s, "image.rows = {}", ic.rows);
    let _ = writeln!(s, "image.cols = {}", ic.cols);
    let _ = writeln!(s, "image.mode = {}", ic.mode.as_str());
    let _ = writeln!(s, "image.extent_policy = {}", format_policy(&ic.extent_policy));
    let _ = writeln!(s, "extent = {}", format_extent(&m.extent));
    let _ = writeln!(s, "tau = {:.16e}", m.tau);
    let _ = writeln!(s, "train_mse_mean = {:.16e}", m.train_mse_mean);
    let _ = writeln!(s, "train_mse_std = {:.16e}", m.train_mse_std);
    let _ = writeln!(s, "train_set_size = {}", m.train_set_size);
    let _ = writeln!(s, "ae.d = {d}");
    let _ = writeln!(s, "ae.k_hidden = {k}");
    let _ = writeln!(s, "ae.enc_transfer = {}", ae.enc_transfer.as_str());
    let _ = writeln!(s, "ae.dec_transfer = {}", ae.dec_transfer.as_str());
    let _ = writeln!(s, "ae.enc_bias = {}", floats(&ae.enc_bias));
    let _ = writeln!(s, "ae.dec_bias = {}", floats(&ae.dec_bias));
    for (j, row) in ae.enc_weights.chunks_exact(d).enumerate() {
        let _ = writeln!(s, "ae.enc_weights.{j} = {}", floats(row));
    }
    for (t, row) in ae.dec_weights.chunks_exact(k).enumerate() {
        let _ = writeln!(s, "ae.dec_weights.{t} = {}", floats(row));
    }
    Ok(s)
}

fn check_tau(m: &DetectorModel) -> Result<()> {
    let recomputed = m.train_mse_mean + THRESHOLD_STD_MULTIPLIER * m.train_mse_std;
    let scale = recomputed.abs().max(f64::MIN_POSITIVE);
    if !((m.tau - recomputed).abs() <= TAU_TOLERANCE * scale) {
        return Err(Error::ThresholdMismatch {
            stored: m.tau,
            recomputed,
        });
    }
    Ok(())
}

struct Records<'a>(BTreeMap<&'a str, &'a str>);

impl<'a> Records<'a> {
    fn get(&self, key: &str) -> Result<&'a str> {
        self.0
            .get(key)
            .copied()
            .ok_or_else(|| Error::malformed(WHAT, format!("missing {key}")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::malformed(WHAT, format!("bad {key} {v:?}")))
    }

    fn floats(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = self
            .get(key)?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::malformed(WHAT, format!("bad number in {key}")))?;
        if v.len() != len {
            return Err(Error::malformed(WHAT, format!("{key} has {} values, expected {len}", v.len())));
        }
        Ok(v)
    }
}

pub fn parse_model(text: &str) -> Result<DetectorModel> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::malformed(WHAT, format!("line {}: expected key = value", n + 1)))?;
        if map.insert(k.trim(), v.trim()).is_some() {
            return Err(Error::malformed(WHAT, format!("repeated key {}", k.trim())));
        }
    }
    let r = Records(map);
    let version = r.get("format_version")?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION.into(),
            found: version.into(),
        });
    }

    let image_config = ImageConfig {
        n: r.parse("image.n")?,
        rows: r.parse("image.rows")?,
        cols: r.parse("image.cols")?,
        mode: r.get("image.mode")?.parse::<ImageMode>()?,
        extent_policy: parse_policy(r.get("image.extent_policy")?)?,
    };
    let (d, k): (usize, usize) = (r.parse("ae.d")?, r.parse("ae.k_hidden")?);
    let mut enc_weights = Vec::with_capacity(d * k);
    for j in 0..k {
        enc_weights.extend(r.floats(&format!("ae.enc_weights.{j}"), d)?);
    }
    let mut dec_weights = Vec::with_capacity(d * k);
    for t in 0..d {
        dec_weights.extend(r.floats(&format!("ae.dec_weights.{t}"), k)?);
    }
    let autoencoder = AutoencoderModel {
        d,
        k_hidden: k,
        enc_weights,
        enc_bias: r.floats("ae.enc_bias", k)?,
        dec_weights,
        dec_bias: r.floats("ae.dec_bias", d)?,
        enc_transfer: r.get("ae.enc_transfer")?.parse()?,
        dec_transfer: r.get("ae.dec_transfer")?.parse()?,
    };
    autoencoder.validate()?;
    let m = DetectorModel {
        image_config,
        extent: parse_extent(r.get("extent")?)?,
        autoencoder,
        tau: r.parse("tau")?,
        train_mse_mean: r.parse("train_mse_mean")?,
        train_mse_std: r.parse("train_mse_std")?,
        train_set_size: r.parse("train_set_size")?,
    };
    check_tau(&m)?;
    Ok(m)
}

/// Writes the model, creating missing parent directories.
pub fn save_model(m: &DetectorModel, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    crate::report::write_text(path.as_ref(), &render_model(m, comments)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DetectorModel> {
    let path = path.as_ref();
    parse_model(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
