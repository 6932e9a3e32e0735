use rand::seq::SliceRandom;

use super::{backward, forward, NetworkConfig, Weights};
use crate::error::{Error, Result};
use crate::io::TaskData;
use crate::pruning::Mask;
use crate::rng::RandomStream;

/// The two randomness sources consumed by training.
#[derive(Debug, Clone)]
pub struct TrainStreams {
    pub shuffle: RandomStream,
    pub noise: RandomStream,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Weights,
    /// Held-out accuracy in `[0, 1]`.
    pub accuracy: f64,
}

/// `w ← w − lr·g`, elementwise over weights and biases.
pub fn sgd_step(weights: &Weights, grads: &Weights, lr: f64) -> Result<Weights> {
    if weights.weights.len() != grads.weights.len() {
        return Err(Error::Shape("gradient layer count differs from weights".into()));
    }
    let mut out = weights.clone();
    apply_sgd(&mut out, grads, lr)?;
    Ok(out)
}

fn apply_sgd(weights: &mut Weights, grads: &Weights, lr: f64) -> Result<()> {
    for (i, (w, g)) in weights.weights.iter_mut().zip(&grads.weights).enumerate() {
        if w.shape() != g.shape() {
            return Err(Error::Shape(format!("layer {i}: weights {:?} vs grads {:?}", w.shape(), g.shape())));
        }
        for (wv, gv) in w.data_mut().iter_mut().zip(g.data()) {
            *wv -= lr * gv;
        }
    }
    for (b, g) in weights.biases.iter_mut().zip(&grads.biases) {
        for (bv, gv) in b.iter_mut().zip(g) {
            *bv -= lr * gv;
        }
    }
    Ok(())
}

/// Fraction of `data.test` classified correctly by the masked network.
pub fn accuracy(weights: &Weights, mask: Option<&Mask>, data: &TaskData) -> Result<f64> {
    let test = &data.test;
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..test.len()).collect();
    for chunk in idx.chunks(256) {
        let probs = forward(weights, mask, &test.images.select_rows(chunk))?;
        for (r, &i) in chunk.iter().enumerate() {
            let row = probs.row(r);
            let pred = argmax(row);
            if pred == test.labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Index of the largest entry; lowest index wins ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Runs `epochs` passes of minibatch SGD over `data.train`.
///
/// Batch order comes from `streams.shuffle`; when `grad_noise > 0` every
/// unmasked weight gradient receives `N(0, grad_noise²)` noise from
/// `streams.noise`. The result is a pure function of the arguments.
pub fn train(
    config: &NetworkConfig,
    weights: &Weights,
    mask: Option<&Mask>,
    data: &TaskData,
    streams: &mut TrainStreams,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(mask) = mask {
        weights.check_mask(mask)?;
    }
    let mut current = weights.clone();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut streams.shuffle);
        for batch_idx in order.chunks(config.batch_size) {
            let batch = data.train.images.select_rows(batch_idx);
            let labels: Vec<usize> = batch_idx.iter().map(|&i| data.train.labels[i]).collect();
            let (_, mut grads) = backward(&current, mask, &batch, &labels)?;
            if config.grad_noise > 0.0 {
                for (l, g) in grads.weights.iter_mut().enumerate() {
                    let layer_mask = mask.map(|m| m.layer(l));
                    for (i, v) in g.data_mut().iter_mut().enumerate() {
                        if layer_mask.is_none_or(|m| m.get(i)) {
                            *v += config.grad_noise * streams.noise.normal();
                        }
                    }
                }
            }
            apply_sgd(&mut current, &grads, config.learning_rate)?;
            if let Some(layer) = current.weights.iter().position(|w| !w.is_finite()) {
                return Err(Error::NonFinite { layer });
            }
        }
    }
    let accuracy = accuracy(&current, mask, data)?;
    Ok(TrainOutcome {
        weights: current,
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_weights, Architecture};

    #[test]
    fn sgd_arithmetic() {
        let arch = Architecture::mlp(1, &[], 2);
        let mut w = Weights::zeros(&arch);
        w.layer_mut(0).data_mut().fill(1.0);
        let mut g = Weights::zeros(&arch);
        g.layer_mut(0).data_mut().fill(0.5);
        let out = sgd_step(&w, &g, 0.1).unwrap();
        assert!(out.layer(0).data().iter().all(|&v| v == 0.95));
    }

    #[test]
    fn zero_grad_or_zero_lr_is_identity() {
        let cfg = NetworkConfig::new(Architecture::mlp(4, &[3], 2));
        let w = init_weights(&cfg, 1).unwrap();
        let zero = Weights::zeros(&cfg.architecture);
        assert_eq!(sgd_step(&w, &zero, 0.3).unwrap(), w);
        let mut g = Weights::zeros(&cfg.architecture);
        g.layer_mut(0).data_mut().fill(7.0);
        assert_eq!(sgd_step(&w, &g, 0.0).unwrap(), w);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }
}
