//! Independent reference implementations shared by the integration tests and
//! the acceptance runner. None of these call into the code they check.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use bloodhound::autoenc::{Architecture, AutoencoderModel, EncoderTransfer, Gradients, TrainConfig};
use bloodhound::eval::Execution;
use bloodhound::experiment::{run_experiment, write_outputs, ExperimentConfig};
use bloodhound::imaging::{ImageMode, PlaneExtent};
use bloodhound::io::{save_model, Label};
use bloodhound::pipeline::{
    encode_to_dir, simulate_to_dir, train_from_manifest, EncodeRequest, ExtentSource, SimulateRequest, MANIFEST_FILE,
};
use bloodhound::sim::{IqSample, JammerConfig, JammerKind, LinkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Brute-force tile counter: every sample is tested against every tile's
/// explicit edges. Returns unclipped counts and the discard count.
pub fn histogram_oracle(samples: &[IqSample], rows: usize, cols: usize, e: &PlaneExtent) -> (Vec<u32>, usize) {
    let di = (e.i_max - e.i_min) / cols as f64;
    let dq = (e.q_max - e.q_min) / rows as f64;
    let mut counts = vec![0u32; rows * cols];
    let mut discarded = 0;
    for s in samples {
        let mut hits = 0;
        for r in 0..rows {
            let q_top = e.q_max - r as f64 * dq;
            let q_bottom = e.q_max - (r + 1) as f64 * dq;
            let in_row = if r == rows - 1 {
                s.q >= e.q_min && s.q <= q_top
            } else {
                s.q > q_bottom && s.q <= q_top
            };
            if !in_row {
                continue;
            }
            for c in 0..cols {
                let i_left = e.i_min + c as f64 * di;
                let i_right = e.i_min + (c + 1) as f64 * di;
                let in_col = if c == cols - 1 {
                    s.i >= i_left && s.i <= e.i_max
                } else {
                    s.i >= i_left && s.i < i_right
                };
                if in_col {
                    counts[r * cols + c] += 1;
                    hits += 1;
                }
            }
        }
        assert!(hits <= 1, "oracle tiles overlap at {s:?}");
        if hits == 0 {
            discarded += 1;
        }
    }
    (counts, discarded)
}

/// A random histogram test case: extent, grid, and samples that include
/// exact tile edges, points outside the extent, and a dense cluster that
/// saturates one tile.
pub struct HistCase {
    pub extent: PlaneExtent,
    pub rows: usize,
    pub cols: usize,
    pub samples: Vec<IqSample>,
}

pub fn random_hist_case(seed: u64) -> HistCase {
    let mut r = rng(seed);
    let i_min = r.random_range(-3.0..1.0);
    let q_min = r.random_range(-3.0..1.0);
    let extent = PlaneExtent::new(
        i_min,
        i_min + r.random_range(0.1..4.0),
        q_min,
        q_min + r.random_range(0.1..4.0),
    )
    .unwrap();
    let rows = r.random_range(2..=32);
    let cols = r.random_range(2..=32);
    let n = r.random_range(1..=10_000);
    let di = (extent.i_max - extent.i_min) / cols as f64;
    let dq = (extent.q_max - extent.q_min) / rows as f64;
    let wide_i = (extent.i_min - 0.3, extent.i_max + 0.3);
    let wide_q = (extent.q_min - 0.3, extent.q_max + 0.3);
    let cluster = IqSample::new(r.random_range(extent.i_min..extent.i_max), r.random_range(extent.q_min..extent.q_max));
    let samples = (0..n)
        .map(|_| match r.random_range(0..5) {
            0 => IqSample::new(
                extent.i_min + r.random_range(0..=cols) as f64 * di,
                extent.q_max - r.random_range(0..=rows) as f64 * dq,
            ),
            1 => IqSample::new(
                [extent.i_min, extent.i_max][r.random_range(0..2)],
                [extent.q_min, extent.q_max][r.random_range(0..2)],
            ),
            2 => cluster,
            _ => IqSample::new(r.random_range(wide_i.0..wide_i.1), r.random_range(wide_q.0..wide_q.1)),
        })
        .collect();
    HistCase {
        extent,
        rows,
        cols,
        samples,
    }
}

/// The sparse autoencoder objective written out directly on dense vectors.
pub fn loss_oracle(m: &AutoencoderModel, batch: &[Vec<f64>], cfg: &TrainConfig) -> f64 {
    let (d, k) = (m.d, m.k_hidden);
    let b = batch.len() as f64;
    let f = |z: f64| match m.enc_transfer {
        EncoderTransfer::LogSig => 1.0 / (1.0 + (-z).exp()),
        EncoderTransfer::SatLin => z.max(0.0).min(1.0),
    };
    let mut recon = 0.0;
    let mut mean_act = vec![0.0; k];
    for x in batch {
        let mut h = vec![0.0; k];
        for j in 0..k {
            let mut z = m.enc_bias[j];
            for t in 0..d {
                z += m.enc_weights[j * d + t] * x[t];
            }
            h[j] = f(z);
            mean_act[j] += h[j] / b;
        }
        let mut sq = 0.0;
        for t in 0..d {
            let mut y = m.dec_bias[t];
            for j in 0..k {
                y += m.dec_weights[t * k + j] * h[j];
            }
            sq += (y - x[t]).powi(2);
        }
        recon += sq / d as f64 / b;
    }
    let rho = cfg.sparsity_proportion;
    let kl: f64 = mean_act
        .iter()
        .map(|&p| rho * (rho / p).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - p)).ln())
        .sum();
    let sum_sq: f64 = m.enc_weights.iter().chain(&m.dec_weights).map(|w| w * w).sum();
    recon + cfg.sparsity_weight * kl + 0.5 * cfg.l2_weight * sum_sq
}

fn params_mut(m: &mut AutoencoderModel) -> [&mut Vec<f64>; 4] {
    [&mut m.enc_weights, &mut m.enc_bias, &mut m.dec_weights, &mut m.dec_bias]
}

fn grads(g: &Gradients) -> [&Vec<f64>; 4] {
    [&g.enc_weights, &g.enc_bias, &g.dec_weights, &g.dec_bias]
}

/// Largest per-coordinate relative error between `analytic` and central
/// finite differences of [`loss_oracle`] with step `h`. Coordinates where
/// both values are below `floor` in magnitude are compared against `floor`.
pub fn max_gradient_error(
    m: &AutoencoderModel,
    batch: &[Vec<f64>],
    cfg: &TrainConfig,
    analytic: &Gradients,
    h: f64,
    floor: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = m.clone();
    for (group, g) in grads(analytic).into_iter().enumerate() {
        for idx in 0..g.len() {
            let orig = params_mut(&mut probe)[group][idx];
            params_mut(&mut probe)[group][idx] = orig + h;
            let up = loss_oracle(&probe, batch, cfg);
            params_mut(&mut probe)[group][idx] = orig - h;
            let down = loss_oracle(&probe, batch, cfg);
            params_mut(&mut probe)[group][idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = g[idx].abs().max(numeric.abs()).max(floor);
            worst = worst.max((g[idx] - numeric).abs() / scale);
        }
    }
    worst
}

/// A small random model with non-zero biases and a batch of sparse inputs
/// in `[0, 1]`.
pub fn gradient_case(seed: u64, transfer: EncoderTransfer, d: usize, k: usize, b: usize) -> (AutoencoderModel, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let mut m = AutoencoderModel::init(d, k, transfer, 0.6, seed);
    for v in m.enc_bias.iter_mut() {
        *v = match transfer {
            EncoderTransfer::LogSig => r.random_range(-1.0..1.0),
            EncoderTransfer::SatLin => r.random_range(0.2..0.6),
        };
    }
    for v in m.dec_bias.iter_mut() {
        *v = r.random_range(-0.2..0.2);
    }
    let batch = (0..b)
        .map(|_| {
            (0..d)
                .map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..1.0) })
                .collect()
        })
        .collect();
    (m, batch)
}

/// Two-pass sample mean and (n − 1) standard deviation.
pub fn mean_std_oracle(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// All-pairs AUC: a jammed score above an unjammed one counts 1, a tie 1/2.
pub fn auc_oracle(unjammed: &[f64], jammed: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &p in jammed {
        for &q in unjammed {
            twice += if p > q {
                2
            } else if p == q {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * unjammed.len() * jammed.len()) as f64
}

/// Confusion counts by explicit loop: scores at or above `tau` are jammed.
pub fn counts_oracle(unjammed: &[f64], jammed: &[f64], tau: f64) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for &s in unjammed {
        if s >= tau {
            fp += 1
        } else {
            tn += 1
        }
    }
    for &s in jammed {
        if s >= tau {
            tp += 1
        } else {
            fn_ += 1
        }
    }
    (tp, fp, tn, fn_)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// Simulates, encodes, trains, and sweeps under one seed into `root`.
pub fn full_pipeline(root: &Path, exec: Execution) {
    let raw = root.join("raw");
    for (kind, rjp, seed) in [(JammerKind::None, 0.0, 1), (JammerKind::Gaussian, 0.4, 2)] {
        let req = SimulateRequest {
            link: LinkConfig {
                num_symbols: 8000,
                ..LinkConfig::default()
            },
            jammer: JammerConfig::new(kind, rjp, 0),
            master_seed: seed,
        };
        simulate_to_dir(&req, &raw).unwrap();
    }
    let req = EncodeRequest {
        n: 1000,
        rows: 8,
        cols: 8,
        mode: ImageMode::Gray,
        extent: ExtentSource::Fixed(PlaneExtent::symmetric(2.0).unwrap()),
        label: Label::Unjammed,
    };
    let images = root.join("images");
    encode_to_dir(&raw.join(MANIFEST_FILE), &req, &images).unwrap();

    let unjammed = root.join("clean");
    encode_to_dir(&raw.join("none-ror1-seed1.iq"), &req, &unjammed).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        learning_rate: 0.01,
        seed: 4,
        ..TrainConfig::default()
    };
    let (model, _) = train_from_manifest(&unjammed.join(MANIFEST_FILE), &cfg, Architecture::default()).unwrap();
    save_model(&model, root.join("model.txt"), &[]).unwrap();

    let sweep = ExperimentConfig::from_toml(
        r#"
        seed = 5
        [jammer]
        rjp = [0.3, 0.6]
        [images]
        n = [400]
        rows = 8
        cols = 8
        unjammed = 6
        jammed = 6
        calibration_symbols = 2000
        [train]
        epochs = 10
        hidden = 2
        learning_rate = 0.01
        [eval]
        k = 3
        "#,
    )
    .unwrap();
    let outcome = run_experiment(&sweep, None, exec).unwrap();
    write_outputs(&outcome, &root.join("sweep")).unwrap();
}

