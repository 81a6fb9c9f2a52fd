//! Fully connected regression networks: tanh hidden layers, one sigmoid
//! output, mean squared error, full-batch gradient descent with momentum.
//!
//! Weights are stored row-major with shape `(fan_out, fan_in)`. Batches are
//! flat row-major buffers of shape `(batch, width)`. Every reduction runs in a
//! fixed sequential order, so a seeded run reproduces bit for bit.

mod model_file;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::Normalizer;

pub use model_file::ModelFile;
pub use train::{train, train_with_hook, EpochStats, Trained, TrainingData, TrainingReport};

pub const ANN_HIDDEN_WIDTH: usize = 200;
pub const ANN_EPOCHS: usize = 15_000;
pub const DNN_HIDDEN_LAYERS: usize = 10;
pub const DNN_HIDDEN_WIDTH: usize = 50;
pub const DNN_EPOCHS: usize = 2_000;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_MOMENTUM: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One hidden layer of 200 units, 15000 epochs.
    Ann,
    /// Ten hidden layers of 50 units, 2000 epochs.
    Dnn,
    Custom,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Ann => "ann",
            Preset::Dnn => "dnn",
            Preset::Custom => "custom",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ann" => Ok(Preset::Ann),
            "dnn" => Ok(Preset::Dnn),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected ann, dnn or custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub preset: Preset,
}

impl NetworkConfig {
    pub fn ann(input_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            input_dim,
            hidden_layers: vec![ANN_HIDDEN_WIDTH],
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            epochs: ANN_EPOCHS,
            seed,
            preset: Preset::Ann,
        }
    }

    /// "Ten layers" is read as ten hidden layers; the output layer comes on
    /// top, giving eleven weight matrices.
    pub fn dnn(input_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            input_dim,
            hidden_layers: vec![DNN_HIDDEN_WIDTH; DNN_HIDDEN_LAYERS],
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            epochs: DNN_EPOCHS,
            seed,
            preset: Preset::Dnn,
        }
    }

    pub fn custom(input_dim: usize, hidden_layers: Vec<usize>, epochs: usize, seed: u64) -> Self {
        NetworkConfig {
            input_dim,
            hidden_layers,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            epochs,
            seed,
            preset: Preset::Custom,
        }
    }

    pub fn preset(preset: Preset, input_dim: usize, seed: u64) -> Self {
        match preset {
            Preset::Ann => Self::ann(input_dim, seed),
            Preset::Dnn => Self::dnn(input_dim, seed),
            Preset::Custom => Self::custom(input_dim, Vec::new(), 0, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input dimension must be at least 1".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config(
                "every hidden layer needs at least one unit".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// `(fan_out, fan_in)` of every layer, output last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut fan_in = self.input_dim;
        for &w in &self.hidden_layers {
            shapes.push((w, fan_in));
            fan_in = w;
        }
        shapes.push((1, fan_in));
        shapes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `(fan_out, fan_in)`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
    pub weight_velocity: Vec<f64>,
    pub bias_velocity: Vec<f64>,
}

impl Layer {
    fn zeros(fan_out: usize, fan_in: usize, activation: Activation) -> Layer {
        Layer {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_out * fan_in],
            biases: vec![0.0; fan_out],
            activation,
            weight_velocity: vec![0.0; fan_out * fan_in],
            bias_velocity: vec![0.0; fan_out],
        }
    }

    /// Weights transposed to `(fan_in, fan_out)`.
    fn transposed(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.weights.len()];
        for o in 0..self.fan_out {
            for i in 0..self.fan_in {
                t[i * self.fan_out + o] = self.weights[o * self.fan_in + i];
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Activations of one forward pass: entry 0 is the input batch, entry `l + 1`
/// the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn predictions(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradients of the loss, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl Network {
    /// Glorot-uniform weights `U(-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`,
    /// zero biases and zero velocities.
    pub fn init(config: &NetworkConfig) -> Result<Network> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let shapes = config.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .into_iter()
            .enumerate()
            .map(|(l, (fan_out, fan_in))| {
                let activation = if l == last {
                    Activation::Sigmoid
                } else {
                    Activation::Tanh
                };
                let mut layer = Layer::zeros(fan_out, fan_in, activation);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for w in &mut layer.weights {
                    *w = rng.gen_range(-limit..limit);
                }
                layer
            })
            .collect();
        Ok(Network { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.fan_in)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Forward pass of a single vector.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        let cache = self.forward_batch(std::slice::from_ref(&x.to_vec()))?;
        Ok((cache.predictions()[0], cache))
    }

    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<ForwardCache> {
        let d = self.input_dim();
        let mut flat = Vec::with_capacity(inputs.len() * d);
        for x in inputs {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network input".into()));
            }
            flat.extend_from_slice(x);
        }
        Ok(self.forward_flat(flat, inputs.len()))
    }

    /// Forward pass over a pre-validated flat `(batch, input_dim)` buffer.
    pub(crate) fn forward_flat(&self, input: Vec<f64>, batch: usize) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        for layer in &self.layers {
            let wt = layer.transposed();
            let prev = activations.last().expect("input present");
            let mut out = vec![0.0; batch * layer.fan_out];
            for n in 0..batch {
                let row = &mut out[n * layer.fan_out..(n + 1) * layer.fan_out];
                row.copy_from_slice(&layer.biases);
                let a = &prev[n * layer.fan_in..(n + 1) * layer.fan_in];
                for (i, &ai) in a.iter().enumerate() {
                    axpy(row, ai, &wt[i * layer.fan_out..(i + 1) * layer.fan_out]);
                }
                for z in row.iter_mut() {
                    *z = layer.activation.apply(*z);
                }
            }
            activations.push(out);
        }
        ForwardCache { batch, activations }
    }

    /// Exact gradients of [`mse_loss`] over the cached batch.
    pub fn backward(&self, cache: &ForwardCache, targets: &[f64]) -> Result<Gradients> {
        let batch = cache.batch;
        if targets.len() != batch {
            return Err(Error::LengthMismatch {
                left: batch,
                right: targets.len(),
            });
        }
        if batch == 0 {
            return Err(Error::EmptyInput("backward batch"));
        }
        let mut grad_w: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.weights.len()])
            .collect();
        let mut grad_b: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.biases.len()])
            .collect();

        let out_layer = self.layers.last().expect("network has an output layer");
        let preds = cache.predictions();
        let scale = 2.0 / batch as f64;
        let mut delta: Vec<f64> = preds
            .iter()
            .zip(targets)
            .map(|(&y, &t)| scale * (y - t) * out_layer.activation.derivative_from_output(y))
            .collect();

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            let (gw, gb) = (&mut grad_w[l], &mut grad_b[l]);
            for n in 0..batch {
                let a = &input[n * layer.fan_in..(n + 1) * layer.fan_in];
                for o in 0..layer.fan_out {
                    let d = delta[n * layer.fan_out + o];
                    axpy(&mut gw[o * layer.fan_in..(o + 1) * layer.fan_in], d, a);
                    gb[o] += d;
                }
            }
            if l == 0 {
                break;
            }
            let below = &self.layers[l - 1];
            let mut next = vec![0.0; batch * layer.fan_in];
            for n in 0..batch {
                let row = &mut next[n * layer.fan_in..(n + 1) * layer.fan_in];
                for o in 0..layer.fan_out {
                    let d = delta[n * layer.fan_out + o];
                    axpy(
                        row,
                        d,
                        &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in],
                    );
                }
                let a = &input[n * layer.fan_in..(n + 1) * layer.fan_in];
                for (r, &ai) in row.iter_mut().zip(a) {
                    *r *= below.activation.derivative_from_output(ai);
                }
            }
            delta = next;
        }
        Ok(Gradients {
            weights: grad_w,
            biases: grad_b,
        })
    }

    /// `v ← momentum·v − learning_rate·g; θ ← θ + v` for every parameter.
    pub fn momentum_step(
        &mut self,
        grads: &Gradients,
        learning_rate: f64,
        momentum: f64,
    ) -> Result<()> {
        if grads.weights.len() != self.layers.len() || grads.biases.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                found: grads.weights.len(),
            });
        }
        for (l, layer) in self.layers.iter_mut().enumerate() {
            if grads.weights[l].len() != layer.weights.len()
                || grads.biases[l].len() != layer.biases.len()
            {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.len(),
                    found: grads.weights[l].len(),
                });
            }
            let params = layer
                .weights
                .iter_mut()
                .zip(layer.weight_velocity.iter_mut())
                .zip(&grads.weights[l])
                .chain(
                    layer
                        .biases
                        .iter_mut()
                        .zip(layer.bias_velocity.iter_mut())
                        .zip(&grads.biases[l]),
                );
            for ((theta, v), g) in params {
                *v = momentum * *v - learning_rate * g;
                *theta += *v;
            }
        }
        Ok(())
    }

    /// Disintegration time in seconds for a raw feature vector.
    pub fn predict(&self, normalizer: &Normalizer, raw: &[f64]) -> Result<f64> {
        let x = normalizer.normalize(raw)?;
        let (y, _) = self.forward(&x)?;
        Ok(normalizer.denormalize_target(y))
    }

    pub fn predict_batch(&self, normalizer: &Normalizer, raw: &[Vec<f64>]) -> Result<Vec<f64>> {
        let xs = raw
            .iter()
            .map(|x| normalizer.normalize(x))
            .collect::<Result<Vec<_>>>()?;
        let cache = self.forward_batch(&xs)?;
        Ok(cache
            .predictions()
            .iter()
            .map(|&y| normalizer.denormalize_target(y))
            .collect())
    }
}

/// Mean of squared residuals.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("mse_loss"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}
