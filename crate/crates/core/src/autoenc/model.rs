use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Encoder transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum EncoderTransfer {
    /// Logistic sigmoid.
    #[default]
    LogSig,
    /// Identity clamped to `[0, 1]`.
    SatLin,
}

impl EncoderTransfer {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderTransfer::LogSig => "logsig",
            EncoderTransfer::SatLin => "satlin",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            EncoderTransfer::LogSig => 1.0 / (1.0 + (-z).exp()),
            EncoderTransfer::SatLin => z.clamp(0.0, 1.0),
        }
    }

    /// Derivative with respect to the pre-activation, given both `z` and `h = f(z)`.
    #[inline]
    pub fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            EncoderTransfer::LogSig => h * (1.0 - h),
            EncoderTransfer::SatLin => {
                if z > 0.0 && z < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::fmt::Display for EncoderTransfer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EncoderTransfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logsig" => Ok(EncoderTransfer::LogSig),
            "satlin" => Ok(EncoderTransfer::SatLin),
            _ => Err(Error::InvalidConfig(format!("unknown encoder transfer {s:?}"))),
        }
    }
}

/// Decoder transfer function. Only the linear decoder is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecoderTransfer {
    #[default]
    PureLin,
}

impl DecoderTransfer {
    pub fn as_str(self) -> &'static str {
        "purelin"
    }
}

impl std::str::FromStr for DecoderTransfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("purelin") {
            Ok(DecoderTransfer::PureLin)
        } else {
            Err(Error::InvalidConfig(format!("unknown decoder transfer {s:?}")))
        }
    }
}

/// Single-bottleneck autoencoder `x -> f(W_e x + b_e) -> W_d h + b_d`.
///
/// `enc_weights` is `k_hidden x d` and `dec_weights` is `d x k_hidden`, both
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub d: usize,
    pub k_hidden: usize,
    pub enc_weights: Vec<f64>,
    pub enc_bias: Vec<f64>,
    pub dec_weights: Vec<f64>,
    pub dec_bias: Vec<f64>,
    pub enc_transfer: EncoderTransfer,
    pub dec_transfer: DecoderTransfer,
}

/// Hidden code and reconstruction for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub hidden: Vec<f64>,
    pub reconstruction: Vec<f64>,
}

/// Glorot-style uniform bound `sqrt(6 / (d + k))`.
pub fn default_init_scale(d: usize, k_hidden: usize) -> f64 {
    (6.0 / (d + k_hidden) as f64).sqrt()
}

impl AutoencoderModel {
    pub fn zeros(d: usize, k_hidden: usize, enc_transfer: EncoderTransfer) -> Self {
        AutoencoderModel {
            d,
            k_hidden,
            enc_weights: vec![0.0; k_hidden * d],
            enc_bias: vec![0.0; k_hidden],
            dec_weights: vec![0.0; d * k_hidden],
            dec_bias: vec![0.0; d],
            enc_transfer,
            dec_transfer: DecoderTransfer::PureLin,
        }
    }

    /// Weights uniform in `[-init_scale, init_scale]`, biases zero.
    pub fn init(
        d: usize,
        k_hidden: usize,
        enc_transfer: EncoderTransfer,
        init_scale: f64,
        seed: u64,
    ) -> Self {
        let mut m = AutoencoderModel::zeros(d, k_hidden, enc_transfer);
        if init_scale > 0.0 {
            let mut rng = seed::rng(seed);
            for w in m.enc_weights.iter_mut().chain(m.dec_weights.iter_mut()) {
                *w = rng.random_range(-init_scale..=init_scale);
            }
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.d, self.k_hidden);
        let shapes = [
            (self.enc_weights.len(), k * d),
            (self.enc_bias.len(), k),
            (self.dec_weights.len(), d * k),
            (self.dec_bias.len(), d),
        ];
        for (actual, expected) in shapes {
            if actual != expected {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        if d == 0 || k == 0 {
            return Err(Error::InvalidConfig("autoencoder dimensions must be non-zero".into()));
        }
        if self.parameters().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("autoencoder has non-finite weights".into()));
        }
        Ok(())
    }

    fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.enc_weights
            .iter()
            .chain(&self.enc_bias)
            .chain(&self.dec_weights)
            .chain(&self.dec_bias)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations `W_e x + b_e`.
    pub(crate) fn encode_linear(&self, x: &[f64], z: &mut [f64]) {
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &self.enc_weights[j * self.d..(j + 1) * self.d];
            *zj = self.enc_bias[j] + dot(row, x);
        }
    }

    /// Hidden code.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut z = vec![0.0; self.k_hidden];
        self.encode_linear(x, &mut z);
        Ok(z.into_iter().map(|z| self.enc_transfer.apply(z)).collect())
    }

    /// Linear decoder applied to a hidden code.
    pub fn decode(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        if hidden.len() != self.k_hidden {
            return Err(Error::DimensionMismatch {
                expected: self.k_hidden,
                actual: hidden.len(),
            });
        }
        Ok(self
            .dec_weights
            .chunks_exact(self.k_hidden)
            .zip(&self.dec_bias)
            .map(|(row, b)| b + dot(row, hidden))
            .collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let hidden = self.encode(x)?;
        let reconstruction = self.decode(&hidden)?;
        Ok(Forward {
            hidden,
            reconstruction,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_gives_half_hidden_and_zero_output() {
        let m = AutoencoderModel::zeros(6, 3, EncoderTransfer::LogSig);
        let f = m.forward(&[0.3, 0.1, 0.0, 1.0, 0.5, 0.2]).unwrap();
        assert_eq!(f.hidden, vec![0.5; 3]);
        assert_eq!(f.reconstruction, vec![0.0; 6]);
    }

    #[test]
    fn saturated_sigmoid() {
        let mut m = AutoencoderModel::zeros(1, 1, EncoderTransfer::LogSig);
        m.enc_bias[0] = 30.0;
        let h = m.forward(&[0.7]).unwrap().hidden[0];
        assert!((h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn satlin_clamps() {
        let t = EncoderTransfer::SatLin;
        assert_eq!((t.apply(-0.5), t.apply(0.25), t.apply(3.0)), (0.0, 0.25, 1.0));
    }

    #[test]
    fn forward_is_deterministic_and_checks_dimensions() {
        let m = AutoencoderModel::init(5, 2, EncoderTransfer::LogSig, 0.5, 9);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
        assert!(m.forward(&x[..4]).is_err());
    }

    #[test]
    fn init_respects_scale_and_zero_biases() {
        let m = AutoencoderModel::init(50, 4, EncoderTransfer::LogSig, 0.1, 1);
        assert!(m.enc_weights.iter().all(|w| w.abs() <= 0.1));
        assert!(m.enc_bias.iter().chain(&m.dec_bias).all(|&b| b == 0.0));
        assert!(m.validate().is_ok());
    }
}
