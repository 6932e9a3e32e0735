use ticket_lab::io::{synth_blobs_task, TaskData};
use ticket_lab::nn::{
    accuracy, backward, forward, init_weights, train, Architecture, LayerShape, NetworkConfig, TrainStreams, Weights,
};
use ticket_lab::pruning::{LayerMask, Mask};
use ticket_lab::rng::RandomStream;
use ticket_lab::Tensor;

fn conv_arch() -> Architecture {
    // 2×12×12 → conv 3@8×8 → pool 3@4×4 → 48 → 5 → 3
    Architecture {
        input: [2, 12, 12],
        layers: vec![
            LayerShape::conv5x5(2, 3),
            LayerShape::relu(),
            LayerShape::max_pool(),
            LayerShape::dense(48, 5),
            LayerShape::relu(),
            LayerShape::dense(5, 3),
            LayerShape::softmax(),
        ],
        classes: 3,
    }
}

fn random_batch(arch: &Architecture, n: usize, seed: u64) -> (Tensor, Vec<usize>) {
    let mut s = RandomStream::new(seed, "batch");
    let [c, h, w] = arch.input;
    let data = (0..n * c * h * w).map(|_| s.uniform(-1.0, 1.0)).collect();
    let labels = (0..n).map(|i| i % arch.classes).collect();
    (Tensor::new(vec![n, c, h, w], data).unwrap(), labels)
}

fn randomized_weights(arch: &Architecture, seed: u64) -> Weights {
    let mut w = init_weights(&NetworkConfig::new(arch.clone()), seed).unwrap();
    let mut s = RandomStream::new(seed, "bias");
    for l in 0..w.layer_count() {
        for b in w.bias_mut(l) {
            *b = s.uniform(-0.1, 0.1);
        }
    }
    w
}

fn loss(w: &Weights, mask: Option<&Mask>, x: &Tensor, y: &[usize]) -> f64 {
    backward(w, mask, x, y).unwrap().0
}

/// Central differences on a sample of weights and biases in every layer.
fn check_gradients(arch: &Architecture, mask: Option<&Mask>) -> f64 {
    let w = randomized_weights(arch, 3);
    let (x, y) = random_batch(arch, 4, 9);
    let (_, grads) = backward(&w, mask, &x, &y).unwrap();
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / scale);
    };
    for l in 0..w.layer_count() {
        let len = w.layer(l).len();
        for i in (0..len).step_by((len / 12).max(1)) {
            if mask.is_some_and(|m| !m.layer(l).get(i)) {
                assert_eq!(grads.layer(l).data()[i], 0.0);
                continue;
            }
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus.layer_mut(l).data_mut()[i] += eps;
            minus.layer_mut(l).data_mut()[i] -= eps;
            compare(grads.layer(l).data()[i], (loss(&plus, mask, &x, &y) - loss(&minus, mask, &x, &y)) / (2.0 * eps));
        }
        for i in 0..w.bias(l).len() {
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus.bias_mut(l)[i] += eps;
            minus.bias_mut(l)[i] -= eps;
            compare(grads.bias(l)[i], (loss(&plus, mask, &x, &y) - loss(&minus, mask, &x, &y)) / (2.0 * eps));
        }
    }
    worst
}

#[test]
fn finite_differences_dense_and_conv() {
    assert!(check_gradients(&conv_arch(), None) < 1e-3);
    assert!(check_gradients(&Architecture::mlp(6, &[7, 5], 4), None) < 1e-3);
}

#[test]
fn finite_differences_with_mask() {
    let arch = conv_arch();
    let mut mask = arch.full_mask();
    for layer in mask.layers_mut() {
        for i in (0..layer.len()).step_by(3) {
            layer.set(i, false);
        }
    }
    assert!(check_gradients(&arch, Some(&mask)) < 1e-3);
}

fn blobs(classes: usize, seed: u64) -> TaskData {
    synth_blobs_task("blobs", classes, 60, 40, 32, 1.0, &RandomStream::new(seed, "data")).unwrap()
}

fn streams(seed: u64) -> TrainStreams {
    TrainStreams {
        shuffle: RandomStream::new(seed, "shuffle"),
        noise: RandomStream::new(seed, "noise"),
    }
}

fn small_config(noise: f64) -> NetworkConfig {
    NetworkConfig {
        epochs: 8,
        grad_noise: noise,
        ..NetworkConfig::new(Architecture::mlp(32, &[16], 4))
    }
}

#[test]
fn learns_separable_blobs() {
    let data = blobs(4, 1);
    let config = small_config(0.0);
    let init = init_weights(&config, 0).unwrap();
    let out = train(&config, &init, None, &data, &mut streams(0)).unwrap();
    assert!(out.accuracy > 0.95, "accuracy {}", out.accuracy);
    assert_eq!(out.accuracy, accuracy(&out.weights, None, &data).unwrap());
}

#[test]
fn training_is_deterministic_per_stream() {
    let data = blobs(4, 2);
    let config = small_config(0.2);
    let init = init_weights(&config, 5).unwrap();
    let a = train(&config, &init, None, &data, &mut streams(1)).unwrap();
    let b = train(&config, &init, None, &data, &mut streams(1)).unwrap();
    let c = train(&config, &init, None, &data, &mut streams(2)).unwrap();
    assert_eq!(a.weights, b.weights);
    assert_ne!(a.weights, c.weights);
}

#[test]
fn pruned_weights_stay_frozen() {
    let data = blobs(4, 3);
    let config = small_config(0.3);
    let init = init_weights(&config, 7).unwrap();
    let mut mask = init.architecture().full_mask();
    for layer in mask.layers_mut() {
        for i in (1..layer.len()).step_by(2) {
            layer.set(i, false);
        }
    }
    let out = train(&config, &init, Some(&mask), &data, &mut streams(4)).unwrap();
    for l in 0..init.layer_count() {
        for i in 0..init.layer(l).len() {
            let (before, after) = (init.layer(l).data()[i], out.weights.layer(l).data()[i]);
            if mask.layer(l).get(i) {
                assert_ne!(before.to_bits(), after.to_bits());
            } else {
                assert_eq!(before.to_bits(), after.to_bits());
            }
        }
    }
}

#[test]
fn empty_ticket_predicts_chance() {
    let data = blobs(4, 4);
    let config = small_config(0.0);
    let init = init_weights(&config, 0).unwrap();
    let arch = init.architecture();
    let zero = Mask::new(
        arch.full_mask()
            .layers()
            .iter()
            .map(|l| LayerMask::zeros(l.name(), l.dims().to_vec()))
            .collect(),
    );
    let probs = forward(&init, Some(&zero), &data.probe(10)).unwrap();
    assert!(probs.data().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    assert!((accuracy(&init, Some(&zero), &data).unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn lenet_shapes_run_end_to_end() {
    let arch = Architecture::lenet(1, 28, 10);
    let w = init_weights(&NetworkConfig::new(arch.clone()), 0).unwrap();
    let (x, _) = random_batch(&arch, 2, 0);
    let out = forward(&w, None, &x).unwrap();
    assert_eq!(out.shape(), &[2, 10]);
    let equal = Architecture::equal_inner_layers();
    let counts: Vec<usize> = equal.parameterized().map(|l| l.weight_count()).collect();
    assert_eq!(counts, vec![400, 2400, 2400, 2500, 2500, 250]);
    equal.activation_shapes().unwrap();
}
