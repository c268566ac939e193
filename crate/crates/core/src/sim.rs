//! Synthetic BPSK link under jamming.
//!
//! The simulator works at complex baseband with perfect synchronization: each
//! BPSK symbol is held for `ror` receiver samples, every receiver sample gets
//! independent complex AWGN, and a jam waveform sampled at the receiver's
//! instants is added on top. An optional AGC rescales the whole block to unit
//! RMS, like the automatic gain control in front of a real receiver.
//!
//! Relative jamming power (RJP) maps to a received jam amplitude of
//! `rjp * JAM_GAIN * rms(clean)`, where `clean` is the received block before
//! jamming. With [`JAM_GAIN`] = 1.5 an RJP of 2/3 puts the jammer at the same
//! power as the legitimate signal: a jammer at 0.1 barely moves the bit error
//! rate, one at 0.8 breaks the link.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

/// Received jam amplitude per unit of RJP, relative to the clean signal RMS.
pub const JAM_GAIN: f64 = 1.5;

/// One complex baseband sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IqSample {
    pub i: f64,
    pub q: f64,
}

impl IqSample {
    pub const fn new(i: f64, q: f64) -> Self {
        IqSample { i, q }
    }

    pub fn is_finite(&self) -> bool {
        self.i.is_finite() && self.q.is_finite()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.i * self.i + self.q * self.q
    }

    fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        IqSample::new(self.i * c - self.q * s, self.i * s + self.q * c)
    }

    fn scale(self, k: f64) -> Self {
        IqSample::new(self.i * k, self.q * k)
    }
}

impl std::ops::Add for IqSample {
    type Output = IqSample;

    fn add(self, rhs: IqSample) -> IqSample {
        IqSample::new(self.i + rhs.i, self.q + rhs.q)
    }
}

/// The default payload: the bytes `0x00..=0xFF`, repeated.
pub fn default_payload() -> Vec<u8> {
    (0..=255u8).collect()
}

/// Expands `payload` MSB-first into exactly `count` bits, wrapping around.
pub fn payload_bits(payload: &[u8], count: usize) -> Vec<bool> {
    if payload.is_empty() {
        return vec![false; count];
    }
    (0..count)
        .map(|k| {
            let byte = payload[(k / 8) % payload.len()];
            (byte >> (7 - (k % 8))) & 1 == 1
        })
        .collect()
}

/// Maps bits onto the BPSK constellation: 0 → (−1, 0), 1 → (+1, 0).
pub fn modulate_bpsk(bits: &[bool]) -> Vec<IqSample> {
    bits.iter()
        .map(|&b| IqSample::new(if b { 1.0 } else { -1.0 }, 0.0))
        .collect()
}

/// Nearest-symbol BPSK decision.
pub fn demodulate_bpsk(sample: IqSample) -> bool {
    sample.i >= 0.0
}

/// Root-mean-square amplitude of a block; zero for an empty block.
pub fn rms(samples: &[IqSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let power: f64 = samples.iter().map(IqSample::norm_sqr).sum();
    (power / samples.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub payload: Vec<u8>,
    pub num_symbols: usize,
    pub snr_db: f64,
    /// Receiver oversampling ratio: receiver samples per symbol.
    pub ror: usize,
    pub agc: bool,
    /// Per-symbol phase jitter in radians, emulating residual carrier-recovery error.
    pub phase_noise_std: f64,
    pub seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            payload: default_payload(),
            num_symbols: 100_000,
            snr_db: 15.0,
            ror: 1,
            agc: true,
            phase_noise_std: 0.0,
            seed: 0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_symbols == 0 {
            return Err(Error::InvalidConfig("num_symbols must be at least 1".into()));
        }
        if self.ror == 0 {
            return Err(Error::InvalidConfig("ror must be at least 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("snr_db must be finite".into()));
        }
        if !(self.phase_noise_std.is_finite() && self.phase_noise_std >= 0.0) {
            return Err(Error::InvalidConfig(
                "phase_noise_std must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Per-component AWGN standard deviation for unit-energy symbols.
    pub fn noise_sigma(&self) -> f64 {
        (10f64.powf(-self.snr_db / 10.0) / 2.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum JammerKind {
    #[default]
    None,
    Tone,
    Gaussian,
    Deceptive,
}

impl JammerKind {
    pub const ALL: [JammerKind; 4] = [
        JammerKind::None,
        JammerKind::Tone,
        JammerKind::Gaussian,
        JammerKind::Deceptive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JammerKind::None => "none",
            JammerKind::Tone => "tone",
            JammerKind::Gaussian => "gaussian",
            JammerKind::Deceptive => "deceptive",
        }
    }
}

impl fmt::Display for JammerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JammerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JammerKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown jammer kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JammerConfig {
    pub kind: JammerKind,
    /// Relative jamming power, see the module docs for the amplitude mapping.
    pub rjp: f64,
    /// Jammer oversampling ratio.
    pub jor: usize,
    /// Tone frequency offset in cycles per symbol.
    pub tone_offset: f64,
    /// Tone start phase in radians; drawn from the seed when `None`.
    pub tone_phase: Option<f64>,
    pub seed: u64,
}

impl Default for JammerConfig {
    fn default() -> Self {
        JammerConfig {
            kind: JammerKind::None,
            rjp: 0.0,
            jor: 1,
            tone_offset: 0.0,
            tone_phase: None,
            seed: 0,
        }
    }
}

impl JammerConfig {
    pub fn none() -> Self {
        JammerConfig::default()
    }

    pub fn new(kind: JammerKind, rjp: f64, seed: u64) -> Self {
        JammerConfig {
            kind,
            rjp,
            seed,
            ..JammerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rjp.is_finite() && self.rjp >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rjp must be finite and non-negative, got {}",
                self.rjp
            )));
        }
        if self.jor == 0 {
            return Err(Error::InvalidConfig("jor must be at least 1".into()));
        }
        if !self.tone_offset.is_finite() {
            return Err(Error::InvalidConfig("tone_offset must be finite".into()));
        }
        Ok(())
    }
}

/// A block of received samples plus where it came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IqRecording {
    pub samples: Vec<IqSample>,
    pub samples_per_symbol: usize,
    pub metadata: BTreeMap<String, String>,
    /// Ground-truth transmitted bits, one per symbol.
    pub tx_bits: Option<Vec<bool>>,
}

impl IqRecording {
    /// A recording with no provenance, e.g. read back from a capture file.
    pub fn from_samples(samples: Vec<IqSample>) -> Self {
        IqRecording {
            samples,
            samples_per_symbol: 1,
            metadata: BTreeMap::new(),
            tx_bits: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Unit-RMS jam waveform sampled at the receiver's instants.
pub fn jam_waveform(
    cfg: &JammerConfig,
    num_receiver_samples: usize,
    ror: usize,
    payload: &[u8],
) -> Result<Vec<IqSample>> {
    if cfg.jor == 0 {
        return Err(Error::InvalidConfig("jor must be at least 1".into()));
    }
    if ror == 0 {
        return Err(Error::InvalidConfig("ror must be at least 1".into()));
    }
    let mut rng = seed::rng(cfg.seed);
    let len = num_receiver_samples;
    let wave = match cfg.kind {
        JammerKind::None => vec![IqSample::default(); len],
        JammerKind::Gaussian => {
            let component = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2)
                .expect("constant standard deviation is valid");
            // The jammer refreshes its value every ceil(ror / jor) receiver samples.
            let hold = ror.div_ceil(cfg.jor);
            let mut out = Vec::with_capacity(len);
            while out.len() < len {
                let value =
                    IqSample::new(component.sample(&mut rng), component.sample(&mut rng));
                let run = hold.min(len - out.len());
                out.extend(std::iter::repeat_n(value, run));
            }
            out
        }
        JammerKind::Tone => {
            let phase0 = cfg
                .tone_phase
                .unwrap_or_else(|| rng.random_range(0.0..2.0 * PI));
            let step = 2.0 * PI * cfg.tone_offset / ror as f64;
            (0..len)
                .map(|k| IqSample::new(1.0, 0.0).rotate(phase0 + step * k as f64))
                .collect()
        }
        JammerKind::Deceptive => {
            let bits_len = payload.len().max(1) * 8;
            let bits = payload_bits(payload, bits_len);
            let symbol_delay = rng.random_range(0..bits_len);
            let sample_offset = rng.random_range(0..ror);
            let phase = rng.random_range(0.0..2.0 * PI);
            (0..len)
                .map(|k| {
                    let symbol = (k + sample_offset) / ror + symbol_delay;
                    let amplitude = if bits[symbol % bits_len] { 1.0 } else { -1.0 };
                    IqSample::new(amplitude, 0.0).rotate(phase)
                })
                .collect()
        }
    };
    Ok(wave)
}

/// Simulates `link.num_symbols` BPSK symbols through AWGN and the configured jammer.
pub fn simulate_link(link: &LinkConfig, jam: &JammerConfig) -> Result<IqRecording> {
    link.validate()?;
    jam.validate()?;

    let bits = payload_bits(&link.payload, link.num_symbols);
    let symbols = modulate_bpsk(&bits);
    let sigma = link.noise_sigma();
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise level: {e}")))?;
    let jitter = Normal::new(0.0, link.phase_noise_std)
        .map_err(|e| Error::InvalidConfig(format!("phase noise: {e}")))?;
    let mut rng = seed::rng(link.seed);

    let mut samples = Vec::with_capacity(link.num_symbols * link.ror);
    for symbol in symbols {
        let symbol = if link.phase_noise_std > 0.0 {
            symbol.rotate(jitter.sample(&mut rng))
        } else {
            symbol
        };
        for _ in 0..link.ror {
            let awgn = IqSample::new(noise.sample(&mut rng), noise.sample(&mut rng));
            samples.push(symbol + awgn);
        }
    }

    if jam.kind != JammerKind::None && jam.rjp > 0.0 {
        let amplitude = jam.rjp * JAM_GAIN * rms(&samples);
        let wave = jam_waveform(jam, samples.len(), link.ror, &link.payload)?;
        for (s, j) in samples.iter_mut().zip(wave) {
            *s = *s + j.scale(amplitude);
        }
    }

    if link.agc {
        let level = rms(&samples);
        if level > 0.0 {
            let gain = 1.0 / level;
            samples.iter_mut().for_each(|s| *s = s.scale(gain));
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("seed".to_string(), link.seed.to_string());
    metadata.insert("jam_seed".to_string(), jam.seed.to_string());
    metadata.insert("jammer_kind".to_string(), jam.kind.to_string());
    metadata.insert("rjp".to_string(), jam.rjp.to_string());
    metadata.insert("jor".to_string(), jam.jor.to_string());
    metadata.insert("ror".to_string(), link.ror.to_string());
    metadata.insert("snr_db".to_string(), link.snr_db.to_string());
    metadata.insert("agc".to_string(), link.agc.to_string());
    metadata.insert("hardware_tag".to_string(), "sim".to_string());

    Ok(IqRecording {
        samples,
        samples_per_symbol: link.ror,
        metadata,
        tx_bits: Some(bits),
    })
}

/// Fraction of symbols whose nearest-symbol decision disagrees with the
/// transmitted bit. Decisions use the first sample of each symbol period.
pub fn measure_ber(rec: &IqRecording) -> Result<f64> {
    let tx = rec.tx_bits.as_ref().ok_or(Error::MissingTxBits)?;
    let sps = rec.samples_per_symbol.max(1);
    let symbols = rec.samples.len() / sps;
    if symbols != tx.len() {
        return Err(Error::DimensionMismatch {
            expected: tx.len(),
            actual: symbols,
        });
    }
    if tx.is_empty() {
        return Ok(0.0);
    }
    let errors = rec
        .samples
        .iter()
        .step_by(sps)
        .zip(tx)
        .filter(|(s, &b)| demodulate_bpsk(**s) != b)
        .count();
    Ok(errors as f64 / tx.len() as f64)
}
