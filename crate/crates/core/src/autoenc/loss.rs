//! Sparse autoencoder objective and its analytic gradient.
//!
//! ```text
//! total = (1/B) sum_b mse(x_b, x̂_b)
//!       + λ/2 * (|W_e|² + |W_d|²)
//!       + β * sum_j KL(ρ || ρ̂_j)
//! ```
//!
//! `ρ̂_j` is the batch-mean activation of hidden unit `j`, clamped to
//! `[1e-8, 1 - 1e-8]`. Biases are not regularized.

use crate::error::{Error, Result};

use super::model::{dot, AutoencoderModel};
use super::TrainConfig;

pub const ACTIVATION_CLAMP: f64 = 1e-8;

/// The three loss components, each already multiplied by its weight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub recon: f64,
    pub l2: f64,
    pub sparsity: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.recon + self.l2 + self.sparsity
    }
}

/// `KL(ρ || ρ̂)` between Bernoulli distributions.
pub fn kl_divergence(rho: f64, rho_hat: f64) -> f64 {
    rho * (rho / rho_hat).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - rho_hat)).ln()
}

/// Gradient buffers shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub enc_weights: Vec<f64>,
    pub enc_bias: Vec<f64>,
    pub dec_weights: Vec<f64>,
    pub dec_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(m: &AutoencoderModel) -> Self {
        Gradients {
            enc_weights: vec![0.0; m.enc_weights.len()],
            enc_bias: vec![0.0; m.enc_bias.len()],
            dec_weights: vec![0.0; m.dec_weights.len()],
            dec_bias: vec![0.0; m.dec_bias.len()],
        }
    }

    fn clear(&mut self) {
        for g in [
            &mut self.enc_weights,
            &mut self.enc_bias,
            &mut self.dec_weights,
            &mut self.dec_bias,
        ] {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// An input vector with its non-zero coordinates listed. Histogram images
/// are mostly empty, so the encoder only touches occupied tiles.
pub(crate) struct Input<'a> {
    pub dense: &'a [f64],
    pub nonzero: Vec<usize>,
}

impl<'a> Input<'a> {
    pub fn new(dense: &'a [f64]) -> Self {
        let nonzero = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(t, _)| t)
            .collect();
        Input { dense, nonzero }
    }
}

fn check_batch<X: AsRef<[f64]>>(m: &AutoencoderModel, batch: &[X]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("loss needs at least one input"));
    }
    for x in batch {
        m.check_input(x.as_ref())?;
    }
    Ok(())
}

/// Evaluates the objective without computing gradients.
pub fn loss<X: AsRef<[f64]>>(
    m: &AutoencoderModel,
    batch: &[X],
    cfg: &TrainConfig,
) -> Result<LossParts> {
    check_batch(m, batch)?;
    let inputs: Vec<Input<'_>> = batch.iter().map(|x| Input::new(x.as_ref())).collect();
    let mut ws = Workspace::new(m, inputs.len());
    let parts = ws.evaluate(m, &inputs, cfg, None);
    finite(parts)
}

/// Evaluates the objective and writes its gradient into a fresh buffer.
pub fn loss_and_gradient<X: AsRef<[f64]>>(
    m: &AutoencoderModel,
    batch: &[X],
    cfg: &TrainConfig,
) -> Result<(LossParts, Gradients)> {
    check_batch(m, batch)?;
    let inputs: Vec<Input<'_>> = batch.iter().map(|x| Input::new(x.as_ref())).collect();
    let mut ws = Workspace::new(m, inputs.len());
    let mut grad = Gradients::zeros_like(m);
    let parts = ws.evaluate(m, &inputs, cfg, Some(&mut grad));
    Ok((finite(parts)?, grad))
}

fn finite(parts: LossParts) -> Result<LossParts> {
    if parts.total().is_finite() {
        Ok(parts)
    } else {
        Err(Error::Divergence { epoch: 0 })
    }
}

/// Scratch buffers reused across training epochs.
pub(crate) struct Workspace {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    g_hidden: Vec<f64>,
}

impl Workspace {
    pub fn new(m: &AutoencoderModel, batch: usize) -> Self {
        Workspace {
            pre: vec![0.0; batch * m.k_hidden],
            hidden: vec![0.0; batch * m.k_hidden],
            g_hidden: vec![0.0; m.k_hidden],
        }
    }

    /// One full-batch pass. When `grad` is given it is overwritten with the
    /// gradient of the total loss.
    pub fn evaluate(
        &mut self,
        m: &AutoencoderModel,
        inputs: &[Input<'_>],
        cfg: &TrainConfig,
        mut grad: Option<&mut Gradients>,
    ) -> LossParts {
        let (d, k) = (m.d, m.k_hidden);
        let b = inputs.len();
        let inv_b = 1.0 / b as f64;

        // Encoder pass for the whole batch: the sparsity term needs the
        // batch-mean activation before any backward step.
        for (s, x) in inputs.iter().enumerate() {
            let pre = &mut self.pre[s * k..(s + 1) * k];
            for (j, zj) in pre.iter_mut().enumerate() {
                let row = &m.enc_weights[j * d..(j + 1) * d];
                *zj = m.enc_bias[j] + x.nonzero.iter().map(|&t| row[t] * x.dense[t]).sum::<f64>();
            }
            let hid = &mut self.hidden[s * k..(s + 1) * k];
            for (h, z) in hid.iter_mut().zip(pre.iter()) {
                *h = m.enc_transfer.apply(*z);
            }
        }

        let rho = cfg.sparsity_proportion;
        let beta = cfg.sparsity_weight;
        let mut sparsity = 0.0;
        // d(sparsity)/d(h_j) for each sample, identical across the batch.
        let mut sparsity_slope = vec![0.0; k];
        for j in 0..k {
            let mean: f64 = (0..b).map(|s| self.hidden[s * k + j]).sum::<f64>() * inv_b;
            let clamped = mean.clamp(ACTIVATION_CLAMP, 1.0 - ACTIVATION_CLAMP);
            sparsity += kl_divergence(rho, clamped);
            if clamped == mean {
                sparsity_slope[j] = beta * inv_b * (-rho / mean + (1.0 - rho) / (1.0 - mean));
            }
        }
        sparsity *= beta;

        let lambda = cfg.l2_weight;
        let l2 = 0.5
            * lambda
            * (m.enc_weights.iter().map(|w| w * w).sum::<f64>()
                + m.dec_weights.iter().map(|w| w * w).sum::<f64>());

        let mut recon = 0.0;
        let recon_scale = 2.0 * inv_b / d as f64;
        if let Some(g) = grad.as_deref_mut() {
            g.clear();
        }

        for (s, x) in inputs.iter().enumerate() {
            let hid = &self.hidden[s * k..(s + 1) * k];
            let mut sq = 0.0;
            match grad.as_deref_mut() {
                None => {
                    for ((row, bias), xt) in m.dec_weights.chunks_exact(k).zip(&m.dec_bias).zip(x.dense) {
                        let e = bias + dot(row, hid) - xt;
                        sq += e * e;
                    }
                }
                Some(g) => {
                    self.g_hidden.iter_mut().for_each(|v| *v = 0.0);
                    let rows = m.dec_weights.chunks_exact(k);
                    let grows = g.dec_weights.chunks_exact_mut(k);
                    for (t, (row, grow)) in rows.zip(grows).enumerate() {
                        let e = m.dec_bias[t] + dot(row, hid) - x.dense[t];
                        sq += e * e;
                        let ge = recon_scale * e;
                        g.dec_bias[t] += ge;
                        for j in 0..k {
                            grow[j] += ge * hid[j];
                            self.g_hidden[j] += ge * row[j];
                        }
                    }
                    let pre = &self.pre[s * k..(s + 1) * k];
                    for j in 0..k {
                        let gz = (self.g_hidden[j] + sparsity_slope[j])
                            * m.enc_transfer.derivative(pre[j], hid[j]);
                        if gz == 0.0 {
                            continue;
                        }
                        g.enc_bias[j] += gz;
                        let grow = &mut g.enc_weights[j * d..(j + 1) * d];
                        for &t in &x.nonzero {
                            grow[t] += gz * x.dense[t];
                        }
                    }
                }
            }
            recon += sq / d as f64;
        }
        recon *= inv_b;

        if let Some(g) = grad {
            for (gw, w) in g.enc_weights.iter_mut().zip(&m.enc_weights) {
                *gw += lambda * w;
            }
            for (gw, w) in g.dec_weights.iter_mut().zip(&m.dec_weights) {
                *gw += lambda * w;
            }
        }

        LossParts {
            recon,
            l2,
            sparsity,
        }
    }
}
