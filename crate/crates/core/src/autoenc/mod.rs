//! Sparse autoencoder anomaly detector.
//!
//! The detector learns to reconstruct images of the unjammed channel only.
//! Its reconstruction error on a new image is the anomaly score, and the
//! decision boundary is `mean + 3.5 * std` of the training errors.

mod loss;
mod model;
mod train;

pub use loss::{kl_divergence, loss, loss_and_gradient, Gradients, LossParts, ACTIVATION_CLAMP};
pub use model::{default_init_scale, AutoencoderModel, DecoderTransfer, EncoderTransfer, Forward};
pub use train::{train, train_images, TrainOutcome};

use crate::error::{Error, Result};
use crate::imaging::{HistogramImage, ImageConfig, ImageMode, PlaneExtent};

/// Multiplier on the training-error standard deviation in the threshold.
pub const THRESHOLD_STD_MULTIPLIER: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// β, weight of the KL sparsity penalty.
    pub sparsity_weight: f64,
    /// ρ, target mean activation of each hidden unit.
    pub sparsity_proportion: f64,
    /// λ, weight of the L2 penalty on weights.
    pub l2_weight: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Half-width of the uniform weight initialization; `None` uses
    /// [`default_init_scale`].
    pub init_scale: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 250,
            sparsity_weight: 0.5,
            sparsity_proportion: 0.05,
            l2_weight: 0.01,
            learning_rate: 0.001,
            seed: 0,
            init_scale: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rho = self.sparsity_proportion;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig(format!("sparsity proportion {rho} not in (0, 1)")));
        }
        for (name, v) in [
            ("sparsity weight", self.sparsity_weight),
            ("l2 weight", self.l2_weight),
            ("learning rate", self.learning_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(s) = self.init_scale {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidConfig(format!("init scale {s} invalid")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub k_hidden: usize,
    pub enc_transfer: EncoderTransfer,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            k_hidden: 16,
            enc_transfer: EncoderTransfer::LogSig,
        }
    }
}

/// A reconstruction error.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MseScore(pub f64);

impl MseScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `(1/d) * |x - y|²`.
pub fn mse(x: &[f64], y: &[f64]) -> Result<MseScore> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Empty("mse of empty vectors"));
    }
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(MseScore(sum / x.len() as f64))
}

/// Row-major pixels scaled into `[0, 1]`.
pub fn flatten(img: &HistogramImage) -> Result<Vec<f64>> {
    if img.mode != ImageMode::Gray {
        return Err(Error::ColorImage);
    }
    Ok(img.pixels.iter().map(|&p| p as f64 / 255.0).collect())
}

/// Inverse of [`flatten`] for vectors whose entries are multiples of 1/255.
pub fn unflatten(
    v: &[f64],
    rows: usize,
    cols: usize,
    extent: PlaneExtent,
) -> Result<HistogramImage> {
    if let Some(bad) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidConfig(format!("pixel value {bad} outside [0, 1]")));
    }
    let pixels = v.iter().map(|x| (x * 255.0).round() as u8).collect();
    HistogramImage::gray(rows, cols, pixels, extent)
}

/// Sample mean and sample (n − 1) standard deviation.
pub fn mean_and_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    // Shifting by the first value keeps constant inputs exact.
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Detection threshold `mean + 3.5 * std` over training reconstruction errors.
pub fn threshold(train_mses: &[f64]) -> Result<f64> {
    let (mean, std) = mean_and_std(train_mses)?;
    Ok(mean + THRESHOLD_STD_MULTIPLIER * std)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Jammed,
    Unjammed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Jammed => "JAMMED",
            Verdict::Unjammed => "UNJAMMED",
        }
    }

    pub fn is_jammed(self) -> bool {
        self == Verdict::Jammed
    }
}

/// Decision rule: a score at or above the threshold is jamming.
pub fn decide(score: MseScore, tau: f64) -> Verdict {
    if score.0 >= tau {
        Verdict::Jammed
    } else {
        Verdict::Unjammed
    }
}

/// A trained autoencoder bundled with its threshold and imaging geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub image_config: ImageConfig,
    pub extent: PlaneExtent,
    pub autoencoder: AutoencoderModel,
    pub tau: f64,
    pub train_mse_mean: f64,
    pub train_mse_std: f64,
    pub train_set_size: usize,
}

impl DetectorModel {
    pub fn new(
        autoencoder: AutoencoderModel,
        train_mses: &[f64],
        image_config: ImageConfig,
        extent: PlaneExtent,
    ) -> Result<Self> {
        if autoencoder.d != image_config.dim() {
            return Err(Error::DimensionMismatch {
                expected: image_config.dim(),
                actual: autoencoder.d,
            });
        }
        let (mean, std) = mean_and_std(train_mses)?;
        Ok(DetectorModel {
            image_config,
            extent,
            autoencoder,
            tau: mean + THRESHOLD_STD_MULTIPLIER * std,
            train_mse_mean: mean,
            train_mse_std: std,
            train_set_size: train_mses.len(),
        })
    }

    /// Trains on unjammed images and derives the threshold.
    pub fn fit(
        images: &[HistogramImage],
        image_config: ImageConfig,
        extent: PlaneExtent,
        cfg: &TrainConfig,
        arch: Architecture,
    ) -> Result<(Self, TrainOutcome)> {
        let outcome = train_images(images, cfg, arch)?;
        let detector = DetectorModel::new(
            outcome.model.clone(),
            &outcome.train_mses,
            image_config,
            extent,
        )?;
        Ok((detector, outcome))
    }

    pub fn score_vector(&self, x: &[f64]) -> Result<MseScore> {
        let f = self.autoencoder.forward(x)?;
        mse(x, &f.reconstruction)
    }

    pub fn score(&self, img: &HistogramImage) -> Result<MseScore> {
        if (img.rows, img.cols) != (self.image_config.rows, self.image_config.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.image_config.dim(),
                actual: img.rows * img.cols,
            });
        }
        self.score_vector(&flatten(img)?)
    }

    pub fn classify(&self, img: &HistogramImage) -> Result<(Verdict, MseScore)> {
        let score = self.score(img)?;
        Ok((decide(score, self.tau), score))
    }
}

/// Scores an image and applies the decision rule.
pub fn classify(detector: &DetectorModel, img: &HistogramImage) -> Result<(Verdict, MseScore)> {
    detector.classify(img)
}
