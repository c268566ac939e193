use crate::error::{Error, Result};
use crate::imaging::HistogramImage;

use super::loss::{Gradients, Input, Workspace};
use super::model::{default_init_scale, AutoencoderModel};
use super::{flatten, mse, Architecture, TrainConfig};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: AutoencoderModel,
    /// Reconstruction error of each training input under the final model.
    pub train_mses: Vec<f64>,
    /// Total loss before each update, followed by the loss of the final model.
    pub loss_history: Vec<f64>,
}

struct Adam {
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(model: &AutoencoderModel) -> Self {
        Adam {
            step: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    fn update(&mut self, model: &mut AutoencoderModel, grad: &Gradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let groups = [
            (&mut model.enc_weights, &grad.enc_weights, &mut self.m.enc_weights, &mut self.v.enc_weights),
            (&mut model.enc_bias, &grad.enc_bias, &mut self.m.enc_bias, &mut self.v.enc_bias),
            (&mut model.dec_weights, &grad.dec_weights, &mut self.m.dec_weights, &mut self.v.dec_weights),
            (&mut model.dec_bias, &grad.dec_bias, &mut self.m.dec_bias, &mut self.v.dec_bias),
        ];
        for (w, g, m, v) in groups {
            for i in 0..w.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

/// Full-batch Adam on the sparse autoencoder objective.
///
/// Inputs are flattened images scaled into `[0, 1]`; all must share one
/// length. Training is single-threaded and deterministic for a given seed.
pub fn train<X: AsRef<[f64]>>(
    inputs: &[X],
    cfg: &TrainConfig,
    arch: Architecture,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if arch.k_hidden == 0 {
        return Err(Error::InvalidConfig("hidden size must be at least 1".into()));
    }
    let first = inputs.first().ok_or(Error::Empty("training needs at least one input"))?;
    let d = first.as_ref().len();
    if d == 0 {
        return Err(Error::Empty("training inputs have zero length"));
    }
    for x in inputs {
        let x = x.as_ref();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("training input is not finite".into()));
        }
    }

    let scale = cfg
        .init_scale
        .unwrap_or_else(|| default_init_scale(d, arch.k_hidden));
    let mut model = AutoencoderModel::init(d, arch.k_hidden, arch.enc_transfer, scale, cfg.seed);
    let batch: Vec<Input<'_>> = inputs.iter().map(|x| Input::new(x.as_ref())).collect();
    let mut ws = Workspace::new(&model, batch.len());
    let mut grad = Gradients::zeros_like(&model);
    let mut adam = Adam::new(&model);
    let mut loss_history = Vec::with_capacity(cfg.epochs + 1);

    for epoch in 0..cfg.epochs {
        let parts = ws.evaluate(&model, &batch, cfg, Some(&mut grad));
        let total = parts.total();
        if !total.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_history.push(total);
        adam.update(&mut model, &grad, cfg.learning_rate);
    }
    let final_loss = ws.evaluate(&model, &batch, cfg, None).total();
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    loss_history.push(final_loss);

    let train_mses = inputs
        .iter()
        .map(|x| {
            let x = x.as_ref();
            let f = model.forward(x)?;
            Ok(mse(x, &f.reconstruction)?.value())
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(TrainOutcome {
        model,
        train_mses,
        loss_history,
    })
}

/// [`train`] on grayscale histogram images.
pub fn train_images(
    images: &[HistogramImage],
    cfg: &TrainConfig,
    arch: Architecture,
) -> Result<TrainOutcome> {
    let inputs = images.iter().map(flatten).collect::<Result<Vec<_>>>()?;
    train(&inputs, cfg, arch)
}
