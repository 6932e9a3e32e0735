//! Minimal deterministic feed-forward network engine.
//!
//! Supports dense, 5×5 valid convolution, 2×2 max-pool, ReLU and a final
//! softmax with cross-entropy loss. Weights are multiplied by a [`Mask`]
//! in the forward pass and masked gradients are exactly zero, so a pruned
//! weight keeps its stored value forever.

mod engine;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pruning::{LayerMask, Mask};
use crate::rng::{RandomStream, INIT};
use crate::tensor::Tensor;

pub use engine::{backward, forward};
pub use train::{accuracy, sgd_step, train, TrainOutcome, TrainStreams};

/// Side length of convolution kernels.
pub const KERNEL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Conv5x5,
    MaxPool2x2,
    Relu,
    Softmax,
}

/// One layer of an [`Architecture`].
///
/// For parameterized layers the weight matrix is `rows × cols`: dense layers
/// store `outputs × inputs`, convolutions store `out_channels × (in_channels·25)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub kind: LayerKind,
    #[serde(default)]
    pub rows: usize,
    #[serde(default)]
    pub cols: usize,
}

impl LayerShape {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            rows: outputs,
            cols: inputs,
        }
    }

    pub fn conv5x5(in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: LayerKind::Conv5x5,
            rows: out_channels,
            cols: in_channels * KERNEL * KERNEL,
        }
    }

    pub fn max_pool() -> Self {
        Self::unparameterized(LayerKind::MaxPool2x2)
    }

    pub fn relu() -> Self {
        Self::unparameterized(LayerKind::Relu)
    }

    pub fn softmax() -> Self {
        Self::unparameterized(LayerKind::Softmax)
    }

    fn unparameterized(kind: LayerKind) -> Self {
        Self { kind, rows: 0, cols: 0 }
    }

    pub fn is_parameterized(&self) -> bool {
        matches!(self.kind, LayerKind::Dense | LayerKind::Conv5x5)
    }

    pub fn weight_count(&self) -> usize {
        if self.is_parameterized() {
            self.rows * self.cols
        } else {
            0
        }
    }

    /// Fan-in of one output unit.
    pub fn fan_in(&self) -> usize {
        self.cols
    }

    fn weight_dims(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Dense => vec![self.rows, self.cols],
            LayerKind::Conv5x5 => vec![self.rows, self.cols / (KERNEL * KERNEL), KERNEL, KERNEL],
            _ => Vec::new(),
        }
    }
}

/// Layer stack plus input geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input as `[channels, height, width]`.
    pub input: [usize; 3],
    pub layers: Vec<LayerShape>,
    pub classes: usize,
}

impl Architecture {
    /// Multilayer perceptron over flat inputs: dense/ReLU pairs, then softmax.
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize) -> Self {
        let mut layers = Vec::new();
        let mut prev = inputs;
        for &h in hidden {
            layers.push(LayerShape::dense(prev, h));
            layers.push(LayerShape::relu());
            prev = h;
        }
        layers.push(LayerShape::dense(prev, classes));
        layers.push(LayerShape::softmax());
        Self {
            input: [1, 1, inputs],
            layers,
            classes,
        }
    }

    /// Two conv/pool stages (6 and 16 filters) and dense 120/84 layers.
    pub fn lenet(channels: usize, side: usize, classes: usize) -> Self {
        let s = ((side - 4) / 2 - 4) / 2;
        let flat = 16 * s * s;
        Self {
            input: [channels, side, side],
            layers: vec![
                LayerShape::conv5x5(channels, 6),
                LayerShape::relu(),
                LayerShape::max_pool(),
                LayerShape::conv5x5(6, 16),
                LayerShape::relu(),
                LayerShape::max_pool(),
                LayerShape::dense(flat, 120),
                LayerShape::relu(),
                LayerShape::dense(120, 84),
                LayerShape::relu(),
                LayerShape::dense(84, classes),
                LayerShape::softmax(),
            ],
            classes,
        }
    }

    /// 28×28 single-channel network whose inner layers hold 2400 or 2500
    /// weights, with 400 in the first and 250 in the last layer.
    pub fn equal_inner_layers() -> Self {
        Self {
            input: [1, 28, 28],
            layers: vec![
                LayerShape::conv5x5(1, 16),
                LayerShape::relu(),
                LayerShape::max_pool(),
                LayerShape::conv5x5(16, 6),
                LayerShape::relu(),
                LayerShape::max_pool(),
                LayerShape::dense(96, 25),
                LayerShape::relu(),
                LayerShape::dense(25, 100),
                LayerShape::relu(),
                LayerShape::dense(100, 25),
                LayerShape::relu(),
                LayerShape::dense(25, 10),
                LayerShape::softmax(),
            ],
            classes: 10,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn parameterized(&self) -> impl Iterator<Item = &LayerShape> {
        self.layers.iter().filter(|l| l.is_parameterized())
    }

    pub fn param_layer_count(&self) -> usize {
        self.parameterized().count()
    }

    /// Display names of the parameterized layers, e.g. `conv0`, `dense1`.
    pub fn layer_names(&self) -> Vec<String> {
        self.parameterized()
            .enumerate()
            .map(|(i, l)| match l.kind {
                LayerKind::Conv5x5 => format!("conv{i}"),
                _ => format!("dense{i}"),
            })
            .collect()
    }

    /// Checks dimensional compatibility and returns the input geometry of
    /// every layer followed by the output geometry.
    pub fn activation_shapes(&self) -> Result<Vec<[usize; 3]>> {
        if self.classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.input.contains(&0) {
            return Err(Error::Config(format!("empty input shape {:?}", self.input)));
        }
        let mut shapes = vec![self.input];
        let mut cur = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.is_parameterized() && (layer.rows == 0 || layer.cols == 0) {
                return Err(Error::Config(format!("layer {i} has an empty weight matrix")));
            }
            cur = match layer.kind {
                LayerKind::Dense => {
                    let flat = cur.iter().product::<usize>();
                    if flat != layer.cols {
                        return Err(Error::Config(format!(
                            "layer {i}: dense expects {} inputs, previous layer yields {flat}",
                            layer.cols
                        )));
                    }
                    [layer.rows, 1, 1]
                }
                LayerKind::Conv5x5 => {
                    if layer.cols % (KERNEL * KERNEL) != 0 || layer.cols / (KERNEL * KERNEL) != cur[0] {
                        return Err(Error::Config(format!(
                            "layer {i}: conv expects {} input channels, got {}",
                            layer.cols / (KERNEL * KERNEL),
                            cur[0]
                        )));
                    }
                    if cur[1] < KERNEL || cur[2] < KERNEL {
                        return Err(Error::Config(format!("layer {i}: input {cur:?} smaller than kernel")));
                    }
                    [layer.rows, cur[1] - KERNEL + 1, cur[2] - KERNEL + 1]
                }
                LayerKind::MaxPool2x2 => {
                    if cur[1] < 2 || cur[2] < 2 {
                        return Err(Error::Config(format!("layer {i}: cannot pool {cur:?}")));
                    }
                    [cur[0], cur[1] / 2, cur[2] / 2]
                }
                LayerKind::Relu => cur,
                LayerKind::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(Error::Config("softmax must be the last layer".into()));
                    }
                    let flat = cur.iter().product::<usize>();
                    if flat != self.classes {
                        return Err(Error::Config(format!(
                            "softmax over {flat} values but {} classes",
                            self.classes
                        )));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        if self.layers.last().map(|l| l.kind) != Some(LayerKind::Softmax) {
            return Err(Error::Config("last layer must be softmax".into()));
        }
        Ok(shapes)
    }

    /// All-ones mask matching this architecture.
    pub fn full_mask(&self) -> Mask {
        Mask::new(
            self.parameterized()
                .zip(self.layer_names())
                .map(|(l, name)| LayerMask::ones(name, l.weight_dims()))
                .collect(),
        )
    }
}

/// Architecture plus SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Standard deviation of Gaussian noise added to every unmasked weight
    /// gradient per step, drawn from the run's noise stream.
    #[serde(default)]
    pub grad_noise: f64,
}

fn default_epochs() -> usize {
    15
}
fn default_learning_rate() -> f64 {
    0.05
}
fn default_batch_size() -> usize {
    32
}

impl NetworkConfig {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            architecture,
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            batch_size: default_batch_size(),
            grad_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture.activation_shapes()?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size 0".into()));
        }
        if !(self.grad_noise.is_finite() && self.grad_noise >= 0.0) {
            return Err(Error::Config(format!("gradient noise {}", self.grad_noise)));
        }
        Ok(())
    }
}

/// Weight tensors and biases of every parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    architecture: Architecture,
    pub(crate) weights: Vec<Tensor>,
    pub(crate) biases: Vec<Vec<f64>>,
}

impl Weights {
    /// All-zero weights and biases for `architecture`.
    pub fn zeros(architecture: &Architecture) -> Self {
        let weights = architecture
            .parameterized()
            .map(|l| Tensor::zeros(l.weight_dims()))
            .collect();
        let biases = architecture.parameterized().map(|l| vec![0.0; l.rows]).collect();
        Self {
            architecture: architecture.clone(),
            weights,
            biases,
        }
    }

    pub fn from_parts(architecture: Architecture, weights: Vec<Tensor>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let shapes: Vec<_> = architecture.parameterized().copied().collect();
        if shapes.len() != weights.len() || shapes.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} parameterized layers, {} weight tensors, {} bias vectors",
                shapes.len(),
                weights.len(),
                biases.len()
            )));
        }
        for (i, ((s, w), b)) in shapes.iter().zip(&weights).zip(&biases).enumerate() {
            if w.shape() != s.weight_dims().as_slice() || b.len() != s.rows {
                return Err(Error::Shape(format!(
                    "layer {i}: expected weights {:?} and {} biases, got {:?} and {}",
                    s.weight_dims(),
                    s.rows,
                    w.shape(),
                    b.len()
                )));
            }
        }
        Ok(Self {
            architecture,
            weights,
            biases,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn layer(&self, i: usize) -> &Tensor {
        &self.weights[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.weights[i]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        &self.biases[i]
    }

    pub fn bias_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.biases[i]
    }

    pub fn layers(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Tensor::is_finite) && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    pub(crate) fn check_mask(&self, mask: &Mask) -> Result<()> {
        if mask.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "mask has {} layers, network has {}",
                mask.len(),
                self.weights.len()
            )));
        }
        for (i, (m, w)) in mask.layers().iter().zip(&self.weights).enumerate() {
            if m.len() != w.len() {
                return Err(Error::Shape(format!(
                    "layer {i}: mask covers {} weights, layer has {}",
                    m.len(),
                    w.len()
                )));
            }
        }
        Ok(())
    }
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` weights and zero biases, drawn from the
/// `init` stream of `seed`. Same seed, same bits.
pub fn init_weights(config: &NetworkConfig, seed: u64) -> Result<Weights> {
    config.validate()?;
    let arch = &config.architecture;
    let base = RandomStream::new(seed, INIT);
    let mut weights = Weights::zeros(arch);
    for (i, shape) in arch.parameterized().enumerate() {
        let bound = 1.0 / (shape.fan_in() as f64).sqrt();
        let mut stream = base.split_index(i as u64);
        for w in weights.weights[i].data_mut() {
            *w = stream.uniform(-bound, bound);
        }
    }
    Ok(weights)
}
