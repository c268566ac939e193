mod common;

use bloodhound::autoenc::{
    loss, loss_and_gradient, mean_and_std, threshold, train, Architecture, EncoderTransfer, TrainConfig,
};
use proptest::prelude::*;
use statrs::statistics::Statistics;

fn full_loss_cfg() -> TrainConfig {
    TrainConfig {
        sparsity_weight: 0.5,
        sparsity_proportion: 0.05,
        l2_weight: 0.01,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_matches_dense_oracle() {
    for transfer in [EncoderTransfer::LogSig, EncoderTransfer::SatLin] {
        for seed in 0..10 {
            let (m, batch) = common::gradient_case(seed, transfer, 16, 4, 3);
            let cfg = full_loss_cfg();
            let ours = loss(&m, &batch, &cfg).unwrap().total();
            let oracle = common::loss_oracle(&m, &batch, &cfg);
            assert!(common::rel_close(ours, oracle, 1e-12), "{transfer} {seed}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for transfer in [EncoderTransfer::LogSig, EncoderTransfer::SatLin] {
        for seed in 0..10 {
            let (m, batch) = common::gradient_case(seed, transfer, 16, 4, 3);
            let cfg = full_loss_cfg();
            let (_, g) = loss_and_gradient(&m, &batch, &cfg).unwrap();
            let err = common::max_gradient_error(&m, &batch, &cfg, &g, 1e-5, 1e-8);
            assert!(err < 1e-5, "{transfer} seed {seed}: relative error {err:e}");
        }
    }
}

proptest! {
    #[test]
    fn threshold_matches_oracles(values in prop::collection::vec(0.0f64..10.0, 2..200)) {
        let (mean, std) = mean_and_std(&values).unwrap();
        let (om, os) = common::mean_std_oracle(&values);
        prop_assert!(common::rel_close(mean, om, 1e-12));
        prop_assert!(common::rel_close(std, os, 1e-12) || (std - os).abs() < 1e-15);
        prop_assert!(common::rel_close(mean, values.as_slice().mean(), 1e-12));
        prop_assert!(common::rel_close(std, values.as_slice().std_dev(), 1e-12) || std < 1e-15);
        prop_assert!(common::rel_close(threshold(&values).unwrap(), om + 3.5 * os, 1e-12));
    }
}

#[test]
fn loss_falls_over_a_training_run() {
    let mut r = common::rng(5);
    use rand::Rng;
    let d = 256;
    let base: Vec<f64> = (0..d).map(|t| if t % 17 < 3 { 0.3 } else { 0.0 }).collect();
    let inputs: Vec<Vec<f64>> = (0..20)
        .map(|_| base.iter().map(|v| if *v > 0.0 { v + r.random_range(-0.05..0.05) } else { 0.0 }).collect())
        .collect();
    for transfer in [EncoderTransfer::LogSig, EncoderTransfer::SatLin] {
        let cfg = TrainConfig {
            epochs: 250,
            seed: 11,
            ..TrainConfig::default()
        };
        let arch = Architecture {
            k_hidden: 8,
            enc_transfer: transfer,
        };
        let out = train(&inputs, &cfg, arch).unwrap();
        assert_eq!(out.loss_history.len(), 251);
        assert!(out.loss_history[249] < out.loss_history[0], "{transfer}: {:?}", (out.loss_history[0], out.loss_history[249]));
        assert_eq!(out, train(&inputs, &cfg, arch).unwrap());
    }
}
