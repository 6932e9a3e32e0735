use std::borrow::Cow;

use super::{LayerKind, Weights, KERNEL};
use crate::error::{Error, Result};
use crate::pruning::Mask;
use crate::tensor::Tensor;

/// Weight matrices with pruned entries zeroed.
fn effective<'a>(weights: &'a Weights, mask: Option<&Mask>) -> Result<Vec<Cow<'a, [f64]>>> {
    match mask {
        None => Ok(weights.weights.iter().map(|w| Cow::Borrowed(w.data())).collect()),
        Some(mask) => {
            weights.check_mask(mask)?;
            Ok(weights
                .weights
                .iter()
                .zip(mask.layers())
                .map(|(w, m)| {
                    let data = w
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| if m.get(i) { v } else { 0.0 })
                        .collect::<Vec<_>>();
                    Cow::Owned(data)
                })
                .collect())
        }
    }
}

/// Per-layer inputs recorded during the forward pass.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pool_argmax: Vec<Vec<usize>>,
}

fn check_batch(weights: &Weights, batch: &Tensor) -> Result<usize> {
    let arch = weights.architecture();
    if batch.rows() == 0 || batch.row_len() != arch.input_len() {
        return Err(Error::Shape(format!(
            "batch {:?} does not match input {:?}",
            batch.shape(),
            arch.input
        )));
    }
    Ok(batch.rows())
}

fn run(weights: &Weights, eff: &[Cow<'_, [f64]>], batch: &Tensor, keep_trace: bool) -> Result<(Vec<f64>, Trace)> {
    let n = check_batch(weights, batch)?;
    let arch = weights.architecture();
    let shapes = arch.activation_shapes()?;
    let mut trace = Trace {
        inputs: Vec::new(),
        pool_argmax: Vec::new(),
    };
    let mut act = batch.data().to_vec();
    let mut p = 0;
    for (li, layer) in arch.layers.iter().enumerate() {
        let [c, h, w] = shapes[li];
        let [oc, oh, ow] = shapes[li + 1];
        let next = match layer.kind {
            LayerKind::Dense => {
                let out = dense_forward(&act, &eff[p], &weights.biases[p], n, layer.cols, layer.rows);
                p += 1;
                out
            }
            LayerKind::Conv5x5 => {
                let out = conv_forward(&act, &eff[p], &weights.biases[p], n, [c, h, w], oc);
                p += 1;
                out
            }
            LayerKind::MaxPool2x2 => {
                let (out, arg) = pool_forward(&act, n, [c, h, w], [oh, ow]);
                if keep_trace {
                    trace.pool_argmax.push(arg);
                }
                out
            }
            LayerKind::Relu => act.iter().map(|&v| v.max(0.0)).collect(),
            LayerKind::Softmax => softmax_rows(&act, n, arch.classes),
        };
        if keep_trace {
            trace.inputs.push(act);
        }
        act = next;
    }
    Ok((act, trace))
}

/// Class-probability rows for `batch` (`[n, c, h, w]` or `[n, features]`).
/// Pruned weights act as exact zeros; `None` means no mask.
pub fn forward(weights: &Weights, mask: Option<&Mask>, batch: &Tensor) -> Result<Tensor> {
    let eff = effective(weights, mask)?;
    let (probs, _) = run(weights, &eff, batch, false)?;
    let rows = batch.rows();
    Tensor::new(vec![rows, weights.architecture().classes], probs)
}

/// Mean cross-entropy loss and its gradient. Gradients at masked positions
/// are exactly zero.
pub fn backward(weights: &Weights, mask: Option<&Mask>, batch: &Tensor, labels: &[usize]) -> Result<(f64, Weights)> {
    let arch = weights.architecture();
    let classes = arch.classes;
    let n = check_batch(weights, batch)?;
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label { label, classes });
    }
    let eff = effective(weights, mask)?;
    let (probs, trace) = run(weights, &eff, batch, true)?;
    let shapes = arch.activation_shapes()?;

    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (b, &y) in labels.iter().enumerate() {
        loss -= probs[b * classes + y].max(f64::MIN_POSITIVE).ln();
        grad[b * classes + y] -= 1.0;
    }
    loss /= n as f64;
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);

    let mut grads = Weights::zeros(arch);
    let mut p = weights.weights.len();
    let mut pool_idx = trace.pool_argmax.len();
    for (li, layer) in arch.layers.iter().enumerate().rev() {
        let input = &trace.inputs[li];
        let [c, h, w] = shapes[li];
        let [oc, oh, ow] = shapes[li + 1];
        grad = match layer.kind {
            // Softmax and cross-entropy are differentiated jointly above.
            LayerKind::Softmax => grad,
            LayerKind::Relu => grad.iter().zip(input).map(|(&g, &x)| if x > 0.0 { g } else { 0.0 }).collect(),
            LayerKind::MaxPool2x2 => {
                pool_idx -= 1;
                let mut gin = vec![0.0; input.len()];
                for (o, &src) in trace.pool_argmax[pool_idx].iter().enumerate() {
                    gin[src] += grad[o];
                }
                gin
            }
            LayerKind::Dense => {
                p -= 1;
                let (gw, gb, gin) = dense_backward(&grad, input, &eff[p], n, layer.cols, layer.rows);
                grads.weights[p] = Tensor::new(weights.weights[p].shape().to_vec(), gw)?;
                grads.biases[p] = gb;
                gin
            }
            LayerKind::Conv5x5 => {
                p -= 1;
                let (gw, gb, gin) = conv_backward(&grad, input, &eff[p], n, [c, h, w], [oc, oh, ow]);
                grads.weights[p] = Tensor::new(weights.weights[p].shape().to_vec(), gw)?;
                grads.biases[p] = gb;
                gin
            }
        };
    }
    if let Some(mask) = mask {
        for (g, m) in grads.weights.iter_mut().zip(mask.layers()) {
            for (i, v) in g.data_mut().iter_mut().enumerate() {
                if !m.get(i) {
                    *v = 0.0;
                }
            }
        }
    }
    Ok((loss, grads))
}

fn softmax_rows(logits: &[f64], n: usize, classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * classes];
    for b in 0..n {
        let row = &logits[b * classes..(b + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, &v) in out[b * classes..(b + 1) * classes].iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        out[b * classes..(b + 1) * classes].iter_mut().for_each(|o| *o /= sum);
    }
    out
}

fn dense_forward(x: &[f64], w: &[f64], bias: &[f64], n: usize, inputs: usize, outputs: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * outputs];
    for b in 0..n {
        let xb = &x[b * inputs..(b + 1) * inputs];
        for o in 0..outputs {
            let row = &w[o * inputs..(o + 1) * inputs];
            out[b * outputs + o] = bias[o] + row.iter().zip(xb).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    out
}

fn dense_backward(
    g: &[f64],
    x: &[f64],
    w: &[f64],
    n: usize,
    inputs: usize,
    outputs: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut gw = vec![0.0; outputs * inputs];
    let mut gb = vec![0.0; outputs];
    let mut gin = vec![0.0; n * inputs];
    for b in 0..n {
        let xb = &x[b * inputs..(b + 1) * inputs];
        let gib = &mut gin[b * inputs..(b + 1) * inputs];
        for o in 0..outputs {
            let go = g[b * outputs + o];
            if go == 0.0 {
                continue;
            }
            gb[o] += go;
            let gwr = &mut gw[o * inputs..(o + 1) * inputs];
            let wr = &w[o * inputs..(o + 1) * inputs];
            for i in 0..inputs {
                gwr[i] += go * xb[i];
                gib[i] += go * wr[i];
            }
        }
    }
    (gw, gb, gin)
}

fn conv_forward(x: &[f64], w: &[f64], bias: &[f64], n: usize, [c, h, wd]: [usize; 3], oc: usize) -> Vec<f64> {
    let (oh, ow) = (h - KERNEL + 1, wd - KERNEL + 1);
    let mut out = vec![0.0; n * oc * oh * ow];
    for b in 0..n {
        let xb = &x[b * c * h * wd..(b + 1) * c * h * wd];
        for o in 0..oc {
            let ob = &mut out[(b * oc + o) * oh * ow..(b * oc + o + 1) * oh * ow];
            ob.iter_mut().for_each(|v| *v = bias[o]);
            for ic in 0..c {
                let plane = &xb[ic * h * wd..(ic + 1) * h * wd];
                let kernel = &w[(o * c + ic) * KERNEL * KERNEL..(o * c + ic + 1) * KERNEL * KERNEL];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let k = kernel[ky * KERNEL + kx];
                        if k == 0.0 {
                            continue;
                        }
                        for y in 0..oh {
                            let src = &plane[(y + ky) * wd + kx..(y + ky) * wd + kx + ow];
                            let dst = &mut ob[y * ow..(y + 1) * ow];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += k * s;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(
    g: &[f64],
    x: &[f64],
    w: &[f64],
    n: usize,
    [c, h, wd]: [usize; 3],
    [oc, oh, ow]: [usize; 3],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; oc];
    let mut gin = vec![0.0; x.len()];
    for b in 0..n {
        let xb = &x[b * c * h * wd..(b + 1) * c * h * wd];
        let gib = &mut gin[b * c * h * wd..(b + 1) * c * h * wd];
        for o in 0..oc {
            let go = &g[(b * oc + o) * oh * ow..(b * oc + o + 1) * oh * ow];
            gb[o] += go.iter().sum::<f64>();
            for ic in 0..c {
                let base = (o * c + ic) * KERNEL * KERNEL;
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let k = w[base + ky * KERNEL + kx];
                        let mut acc = 0.0;
                        for y in 0..oh {
                            let row = (ic * h + y + ky) * wd + kx;
                            for xo in 0..ow {
                                let gv = go[y * ow + xo];
                                acc += gv * xb[row + xo];
                                gib[row + xo] += gv * k;
                            }
                        }
                        gw[base + ky * KERNEL + kx] += acc;
                    }
                }
            }
        }
    }
    (gw, gb, gin)
}

fn pool_forward(x: &[f64], n: usize, [c, h, w]: [usize; 3], [oh, ow]: [usize; 2]) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; n * c * oh * ow];
    let mut arg = vec![0; out.len()];
    for bc in 0..n * c {
        let plane = bc * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let mut best = plane + 2 * y * w + 2 * xo;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = plane + (2 * y + dy) * w + 2 * xo + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                let o = (bc * oh + y) * ow + xo;
                out[o] = x[best];
                arg[o] = best;
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_weights, Architecture, LayerShape, NetworkConfig};
    use crate::rng::RandomStream;

    fn random_batch(rows: usize, len: usize, seed: u64) -> Tensor {
        let mut s = RandomStream::new(seed, "batch");
        Tensor::new(vec![rows, len], (0..rows * len).map(|_| s.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn rows_are_distributions() {
        let cfg = NetworkConfig::new(Architecture::mlp(5, &[7], 4));
        let w = init_weights(&cfg, 3).unwrap();
        let out = forward(&w, None, &random_batch(6, 5, 1)).unwrap();
        assert_eq!(out.shape(), &[6, 4]);
        for r in 0..6 {
            let row = out.row(r);
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn full_mask_equals_no_mask() {
        let cfg = NetworkConfig::new(Architecture::mlp(5, &[7], 4));
        let w = init_weights(&cfg, 3).unwrap();
        let x = random_batch(4, 5, 2);
        let mask = cfg.architecture.full_mask();
        assert_eq!(forward(&w, None, &x).unwrap(), forward(&w, Some(&mask), &x).unwrap());
    }

    #[test]
    fn zero_mask_on_last_layer_gives_uniform_output() {
        let cfg = NetworkConfig::new(Architecture::mlp(5, &[7], 4));
        let w = init_weights(&cfg, 3).unwrap();
        let mut mask = cfg.architecture.full_mask();
        let last = &mut mask.layers_mut()[1];
        for i in 0..last.len() {
            last.set(i, false);
        }
        let out = forward(&w, Some(&mask), &random_batch(3, 5, 4)).unwrap();
        assert!(out.data().iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn masked_gradients_are_exactly_zero() {
        let cfg = NetworkConfig::new(Architecture::mlp(5, &[7], 3));
        let w = init_weights(&cfg, 11).unwrap();
        let mut mask = cfg.architecture.full_mask();
        for (l, m) in mask.layers_mut().iter_mut().enumerate() {
            for i in (l..m.len()).step_by(3) {
                m.set(i, false);
            }
        }
        let (_, g) = backward(&w, Some(&mask), &random_batch(8, 5, 5), &[0, 1, 2, 0, 1, 2, 0, 1]).unwrap();
        for (gl, m) in g.layers().iter().zip(mask.layers()) {
            for (i, &v) in gl.data().iter().enumerate() {
                if !m.get(i) {
                    assert_eq!(v.to_bits(), 0.0f64.to_bits());
                }
            }
        }
    }

    #[test]
    fn confident_correct_prediction_has_tiny_loss() {
        let arch = Architecture::mlp(2, &[], 2);
        let mut w = Weights::zeros(&arch);
        w.layer_mut(0).data_mut().copy_from_slice(&[20.0, 0.0, 0.0, 20.0]);
        let x = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (loss, _) = backward(&w, None, &x, &[0, 1]).unwrap();
        assert!(loss < 1e-6, "{loss}");
    }

    #[test]
    fn label_and_shape_errors() {
        let cfg = NetworkConfig::new(Architecture::mlp(3, &[], 2));
        let w = init_weights(&cfg, 0).unwrap();
        let x = random_batch(2, 3, 0);
        assert!(matches!(backward(&w, None, &x, &[0, 2]), Err(Error::Label { label: 2, .. })));
        assert!(matches!(forward(&w, None, &random_batch(2, 4, 0)), Err(Error::Shape(_))));
        let bad = Architecture::mlp(3, &[4], 2).full_mask();
        assert!(matches!(forward(&w, Some(&bad), &x), Err(Error::Shape(_))));
    }

    #[test]
    fn conv_pool_output_shape() {
        let arch = Architecture {
            input: [1, 8, 8],
            layers: vec![
                LayerShape::conv5x5(1, 2),
                LayerShape::relu(),
                LayerShape::max_pool(),
                LayerShape::dense(8, 3),
                LayerShape::softmax(),
            ],
            classes: 3,
        };
        let w = init_weights(&NetworkConfig::new(arch), 1).unwrap();
        let out = forward(&w, None, &random_batch(2, 64, 9).reshape(vec![2, 1, 8, 8]).unwrap()).unwrap();
        assert_eq!(out.shape(), &[2, 3]);
    }
}
