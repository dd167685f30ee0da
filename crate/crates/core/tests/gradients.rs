use kdloc_core::net::{self, forward_pass, forward_pass_frozen, Layer, NetworkSpec, NetworkState};
use kdloc_core::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn loss(spec: &NetworkSpec, params: &[f64], batch: &Tensor, labels: &[usize]) -> f64 {
    let cache = forward_pass(spec, params, batch).unwrap();
    net::cross_entropy_batch(cache.logits(), labels).unwrap().0
}

fn five_point(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

fn random_batch(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = kdloc_core::math::rng(seed);
    Tensor::new(vec![n, c, h, w], (0..n * c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn spec_with(c1: usize, kernel: usize, stride: usize, padding: usize, pool: bool) -> NetworkSpec {
    let mut layers = vec![
        Layer::Conv2d { in_channels: 1, out_channels: c1, kernel, stride, padding },
        Layer::Relu,
    ];
    if pool {
        layers.push(Layer::MaxPool { kernel: 2, stride: 2 });
    }
    layers.push(Layer::Conv2d { in_channels: c1, out_channels: 2, kernel: 1, stride: 1, padding: 0 });
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Dense { inputs: 2, outputs: 3 });
    NetworkSpec { input: [1, 7, 7], layers, classes: 3 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_matches_finite_differences(
        c1 in 1usize..4,
        kernel in 1usize..4,
        stride in 1usize..3,
        padding in 0usize..2,
        pool in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let spec = spec_with(c1, kernel, stride, padding, pool);
        prop_assume!(spec.validate().is_ok());
        let net = NetworkState::build(spec.clone(), seed).unwrap();
        let batch = random_batch(2, 1, 7, 7, seed + 1);
        let labels = [0, 2];
        let mut state = net.clone();
        state.forward(&batch).unwrap();
        let grad = state.backward(&labels).unwrap().grad;
        // The frozen pattern removes kinks from the difference quotient.
        let pattern = state.cache().unwrap().pattern().clone();
        let frozen_loss = |p: &[f64]| {
            let cache = forward_pass_frozen(&spec, p, &batch, &pattern).unwrap();
            net::cross_entropy_batch(cache.logits(), &labels).unwrap().0
        };
        prop_assert_eq!(frozen_loss(net.params()), loss(&spec, net.params(), &batch, &labels));
        for (i, g) in grad.iter().enumerate() {
            let fd = five_point(|d| {
                let mut p = net.params().to_vec();
                p[i] += d;
                frozen_loss(&p)
            }, 1e-3);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
            prop_assert!(rel < 1e-6, "param {}: analytic {} vs fd {}", i, g, fd);
        }
    }
}

#[test]
fn feature_grads_match_perturbing_conv_outputs() {
    // Perturbing a conv output is the same as perturbing that channel's bias
    // at one position; sum the feature gradient over positions to compare
    // with the bias gradient.
    let spec = spec_with(3, 3, 1, 1, true);
    let mut net = NetworkState::build(spec.clone(), 9).unwrap();
    let batch = random_batch(3, 1, 7, 7, 10);
    net.forward(&batch).unwrap();
    let back = net.backward(&[1, 0, 2]).unwrap();
    let offsets = spec.param_offsets();
    for fg in &back.feature_grads {
        let Layer::Conv2d { in_channels, out_channels, kernel, .. } = spec.layers[fg.layer] else { panic!() };
        let bias_at = offsets[fg.layer] + out_channels * in_channels * kernel * kernel;
        let s = fg.grad.shape().to_vec();
        for c in 0..out_channels {
            let mut total = 0.0;
            for b in 0..s[0] {
                let plane = (b * s[1] + c) * s[2] * s[3];
                total += fg.grad.data()[plane..plane + s[2] * s[3]].iter().sum::<f64>();
            }
            assert!((total - back.grad[bias_at + c]).abs() < 1e-12);
        }
    }
}

#[test]
fn default_network_gradient_spot_check() {
    let spec = NetworkSpec::small_cnn([1, 32, 32], 4, 8, 2);
    assert_eq!(spec.param_count(), 354);
    let mut net = NetworkState::build(spec.clone(), 42).unwrap();
    let batch = random_batch(2, 1, 32, 32, 3);
    net.forward(&batch).unwrap();
    let grad = net.backward(&[0, 1]).unwrap().grad;
    let pattern = net.cache().unwrap().pattern().clone();
    for i in (0..grad.len()).step_by(7) {
        let fd = five_point(|d| {
            let mut p = net.params().to_vec();
            p[i] += d;
            let cache = forward_pass_frozen(&spec, &p, &batch, &pattern).unwrap();
            net::cross_entropy_batch(cache.logits(), &[0, 1]).unwrap().0
        }, 1e-3);
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-4);
        assert!(rel < 1e-6, "param {i}: {} vs {fd}", grad[i]);
    }
}
