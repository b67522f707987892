//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use dbayes::nn::{softmax_cross_entropy, LayerSpec, Network, Pass, Tensor};
use dbayes::rng::SplitMix64;

pub fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-10k")
}

/// Every layer type on an 8×8 input: 220 parameters.
pub fn micro_net(seed: u64) -> Network {
    let specs = vec![
        LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 2,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2x2,
        LayerSpec::Conv2d {
            in_channels: 2,
            out_channels: 2,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2x2,
        LayerSpec::Flatten,
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Dense {
            in_features: 8,
            out_features: 8,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            in_features: 8,
            out_features: 10,
        },
    ];
    Network::new(&[1, 8, 8], specs, seed).unwrap()
}

#[derive(Debug)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose ±ε perturbation crossed a ReLU kink or flipped a
    /// pooling argmax.
    pub excluded: usize,
    pub min_relu_margin: f64,
    pub min_pool_gap: f64,
}

pub const FD_EPS: f64 = 1e-5;

/// Central differences against `backward()` for a batch of 4 seeded inputs.
/// Dropout stays in training mode with the same mask for every evaluation.
pub fn gradient_check(seed: u64) -> GradCheck {
    let mut net = micro_net(seed);
    let mut rng = SplitMix64::new(seed ^ 0xA5A5);
    let x: Vec<f64> = (0..4 * 64).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let x = Tensor::new(vec![4, 1, 8, 8], x).unwrap();
    let labels: Vec<usize> = (0..4).map(|_| rng.below(10) as usize).collect();
    let mask_seed = seed.wrapping_add(17);

    let run = |net: &Network| {
        let mut r = SplitMix64::new(mask_seed);
        let (logits, cache) = net.forward(&x, Pass::Train(&mut r)).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        (loss, grad, cache)
    };

    let (_, grad, cache) = run(&net);
    let analytic = net.backward(&cache, &grad).unwrap();
    let pattern = cache.activation_pattern();

    let mut max_rel_error: f64 = 0.0;
    let (mut checked, mut excluded) = (0, 0);
    for (t, g) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let original = net.params()[t].data()[i];
            net.params_mut()[t].data_mut()[i] = original + FD_EPS;
            let (plus, _, c_plus) = run(&net);
            net.params_mut()[t].data_mut()[i] = original - FD_EPS;
            let (minus, _, c_minus) = run(&net);
            net.params_mut()[t].data_mut()[i] = original;

            if c_plus.activation_pattern() != pattern || c_minus.activation_pattern() != pattern {
                excluded += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * FD_EPS);
            let a = g.data()[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            max_rel_error = max_rel_error.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        max_rel_error,
        checked,
        excluded,
        min_relu_margin: cache.min_relu_margin(),
        min_pool_gap: cache.min_pool_gap(),
    }
}
