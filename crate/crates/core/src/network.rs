//! Feed-forward multilayer network: configuration, weight storage, and the
//! forward pass.
//!
//! Weights follow a bias-as-column-zero convention: the matrix for a layer
//! with `m` neurons fed by `p` sources has shape `m x (p + 1)`, and column 0
//! multiplies a constant `+1` bias input. Layer output vectors are stored
//! with that constant in slot 0, so `row[i] * y[i]` summed over `i = 0..=p`
//! is the induced field of a neuron.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};

/// One hidden layer: neuron count plus activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub neurons: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(neurons: usize, activation: Activation) -> Self {
        Self {
            neurons,
            activation,
        }
    }
}

/// Architecture of a network: input arity, hidden layers, output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_count: usize,
    pub hidden_layers: Vec<LayerSpec>,
    pub output_count: usize,
    pub output_activation: Activation,
}

impl NetworkConfig {
    /// Single-output network, the only shape the shipped tooling uses.
    pub fn single_output(
        input_count: usize,
        hidden_layers: Vec<LayerSpec>,
        output_activation: Activation,
    ) -> Self {
        Self {
            input_count,
            hidden_layers,
            output_count: 1,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_count == 0 {
            return Err(Error::InvalidConfig("input_count must be positive".into()));
        }
        if self.output_count == 0 {
            return Err(Error::InvalidConfig("output_count must be positive".into()));
        }
        if self.hidden_layers.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one hidden layer is required".into(),
            ));
        }
        for (i, layer) in self.hidden_layers.iter().enumerate() {
            if layer.neurons == 0 {
                return Err(Error::InvalidConfig(format!(
                    "hidden layer {i} has zero neurons"
                )));
            }
            if layer.activation == Activation::Linear {
                return Err(Error::InvalidConfig(format!(
                    "hidden layer {i} uses linear activation; only the output layer may"
                )));
            }
        }
        Ok(())
    }

    /// Neuron counts per computing layer (hidden layers then output).
    pub fn layer_neurons(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.hidden_layers.iter().map(|l| l.neurons).collect();
        sizes.push(self.output_count);
        sizes
    }

    /// Activation per computing layer (hidden layers then output).
    pub fn layer_activations(&self) -> Vec<Activation> {
        let mut acts: Vec<Activation> = self.hidden_layers.iter().map(|l| l.activation).collect();
        acts.push(self.output_activation);
        acts
    }

    /// Expected `(rows, cols)` of each weight matrix, bias column included.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut prev = self.input_count;
        for neurons in self.layer_neurons() {
            shapes.push((neurons, prev + 1));
            prev = neurons;
        }
        shapes
    }

    /// Total number of weights, biases included.
    pub fn weight_count(&self) -> usize {
        self.weight_shapes().iter().map(|(r, c)| r * c).sum()
    }
}

/// Dense row-major matrix of synaptic weights for one layer.
///
/// Row `j` holds the incoming weights of neuron `j`; column 0 is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::ShapeMismatch("empty weight matrix".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::ShapeMismatch("ragged weight rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.cols..(j + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.cols + i]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, w: f64) {
        self.data[j * self.cols + i] = w;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

/// A network: architecture plus one weight matrix per computing layer.
///
/// Immutable through the public surface except for the training entry
/// points; share freely across threads for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct Network {
    config: NetworkConfig,
    weights: Vec<WeightMatrix>,
}

#[derive(Deserialize)]
struct RawNetwork {
    config: NetworkConfig,
    weights: Vec<WeightMatrix>,
}

impl TryFrom<RawNetwork> for Network {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        Network::from_weights(raw.config, raw.weights)
    }
}

impl Network {
    /// Seeded random initialization.
    ///
    /// Every weight, bias column included, is drawn i.i.d. uniform on
    /// `[-1/sqrt(fan_in + 1), +1/sqrt(fan_in + 1)]` where `fan_in` is the
    /// source-layer neuron count. Draw order is layer, then row, then
    /// column, so an identical `(config, seed)` pair is bit-reproducible.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(config.hidden_layers.len() + 1);
        for (rows, cols) in config.weight_shapes() {
            let fan_in = cols - 1;
            let limit = 1.0 / ((fan_in + 1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let mut m = WeightMatrix::zeros(rows, cols);
            for w in m.as_mut_slice() {
                *w = dist.sample(&mut rng);
            }
            weights.push(m);
        }
        Ok(Self { config, weights })
    }

    /// Builds a network from explicit weights, validating shapes and
    /// finiteness.
    pub fn from_weights(config: NetworkConfig, weights: Vec<WeightMatrix>) -> Result<Self> {
        config.validate()?;
        let shapes = config.weight_shapes();
        if weights.len() != shapes.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weight matrices, got {}",
                shapes.len(),
                weights.len()
            )));
        }
        for (l, (m, (rows, cols))) in weights.iter().zip(&shapes).enumerate() {
            if m.rows() != *rows || m.cols() != *cols {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l}: expected {rows}x{cols}, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            if m.as_slice().iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "layer {l} contains a non-finite weight"
                )));
            }
        }
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn weights(&self) -> &[WeightMatrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [WeightMatrix] {
        &mut self.weights
    }

    pub fn weight_count(&self) -> usize {
        self.config.weight_count()
    }

    /// Copies all weights into `out` in the canonical flat order: layer by
    /// layer, row-major, bias column first in each row. Jacobians and
    /// finite-difference gradients index weights in this order.
    pub fn flatten_weights_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for m in &self.weights {
            out.extend_from_slice(m.as_slice());
        }
    }

    pub fn flat_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weight_count());
        self.flatten_weights_into(&mut out);
        out
    }

    /// Overwrites all weights from a canonical flat vector.
    pub fn assign_flat_weights(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.weight_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weights, got {}",
                self.weight_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for m in &mut self.weights {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Runs the forward pass, reusing `trace` buffers.
    pub fn forward_into(&self, input: &[f64], trace: &mut ForwardTrace) -> Result<()> {
        if input.len() != self.config.input_count {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.config.input_count
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite input entry".into()));
        }
        trace.reset_for(self);

        trace.activations[0][0] = 1.0;
        trace.activations[0][1..].copy_from_slice(input);

        let acts = self.config.layer_activations();
        for (l, matrix) in self.weights.iter().enumerate() {
            let activation = acts[l];
            // Split so the previous layer's outputs can be read while this
            // layer's buffers are written.
            let (prev_slice, rest) = trace.activations[l..l + 2].split_at_mut(1);
            let prev = &prev_slice[0];
            let cur = &mut rest[0];
            let fields = &mut trace.induced_fields[l];
            for j in 0..matrix.rows() {
                let mut v = 0.0;
                for (w, y) in matrix.row(j).iter().zip(prev.iter()) {
                    v = w.mul_add(*y, v);
                }
                fields[j] = v;
                cur[j + 1] = activation.apply(v);
            }
            cur[0] = 1.0;
        }
        Ok(())
    }

    /// Runs the forward pass and returns a fresh trace.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        let mut trace = ForwardTrace::for_network(self);
        self.forward_into(input, &mut trace)?;
        Ok(trace)
    }

    /// Network output for a single-output network; no trace retained.
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        let trace = self.forward(input)?;
        Ok(trace.output())
    }
}

/// Everything the forward pass records for the backward pass: per-layer
/// induced fields and per-layer outputs (with the constant bias slot).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `activations[0]` is the input layer; each vector has the bias `1.0`
    /// in slot 0.
    activations: Vec<Vec<f64>>,
    /// Induced fields per computing layer, no bias slot.
    induced_fields: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Allocates buffers sized for `net`; contents are unspecified until a
    /// forward pass fills them.
    pub fn for_network(net: &Network) -> Self {
        let mut activations = Vec::with_capacity(net.weights.len() + 1);
        activations.push(vec![0.0; net.config.input_count + 1]);
        let mut induced_fields = Vec::with_capacity(net.weights.len());
        for neurons in net.config.layer_neurons() {
            activations.push(vec![0.0; neurons + 1]);
            induced_fields.push(vec![0.0; neurons]);
        }
        Self {
            activations,
            induced_fields,
        }
    }

    /// True when the buffer shapes agree with `net`'s architecture.
    pub(crate) fn matches_network(&self, net: &Network) -> bool {
        self.activations.len() == net.weights.len() + 1
            && self.activations[0].len() == net.config.input_count + 1
            && self
                .induced_fields
                .iter()
                .zip(net.config.layer_neurons())
                .all(|(f, n)| f.len() == n)
            && self
                .activations
                .iter()
                .skip(1)
                .zip(net.config.layer_neurons())
                .all(|(a, n)| a.len() == n + 1)
    }

    fn reset_for(&mut self, net: &Network) {
        if !self.matches_network(net) {
            *self = Self::for_network(net);
        }
    }

    /// Number of computing layers.
    pub fn layer_count(&self) -> usize {
        self.induced_fields.len()
    }

    /// Outputs of layer `l` including the bias slot; `l = 0` is the input
    /// layer.
    pub fn layer_output(&self, l: usize) -> &[f64] {
        &self.activations[l]
    }

    /// Induced fields of computing layer `l` (0-based over hidden layers
    /// then output).
    pub fn induced_field(&self, l: usize) -> &[f64] {
        &self.induced_fields[l]
    }

    /// Output vector of the network, bias slot stripped.
    pub fn outputs(&self) -> &[f64] {
        let last = self.activations.last().expect("trace has layers");
        &last[1..]
    }

    /// Single network output; the shipped tooling always uses one output
    /// neuron.
    pub fn output(&self) -> f64 {
        self.outputs()[0]
    }
}
