//! Dense feed-forward networks with hand-written forward and backward passes.
//!
//! Weights are stored `(out, in)` row-major, so a layer maps a batch `X`
//! (`n x in`) to `act(X·Wᵀ + b)`. All arithmetic is `f64` and every reduction
//! runs in a fixed order, which keeps training bit-reproducible.

mod adam;
mod checkpoint;
mod loss;

pub use adam::AdamState;
pub use checkpoint::{LayerRecord, NetworkCheckpoint};
pub use loss::{accuracy, bce_loss, bce_rowsum_loss, clamp_prob, PROB_CLAMP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[serde(rename = "relu")]
    ReLU,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Tensor2,
    biases: Vec<f64>,
    activation: Activation,
}

/// Parameter gradients of one layer, shaped like the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Tensor2,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Tensor2, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Config(format!(
                "layer must have non-zero size, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        if biases.len() != weights.rows() {
            return Err(Error::shape(
                "DenseLayer::new biases",
                weights.rows(),
                biases.len(),
            ));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::new(
            Tensor2::zeros(out_dim, in_dim),
            vec![0.0; out_dim],
            activation,
        )
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_dim, out_dim, activation)?;
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        for w in layer.weights.data_mut() {
            *w = rng.uniform_range(-limit, limit);
        }
        Ok(layer)
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Tensor2 {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        self.weights.data_mut()
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// `[weights, biases]` as disjoint mutable views.
    pub fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weights.data_mut(), self.biases.as_mut_slice()]
    }

    /// Weights plus biases.
    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.biases.len()
    }

    /// Returns `(pre_activation, output)`.
    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, Tensor2)> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "DenseLayer::forward input columns",
                self.in_dim(),
                input.cols(),
            ));
        }
        let n = input.rows();
        let out_dim = self.out_dim();
        let mut pre = Tensor2::zeros(n, out_dim);
        for i in 0..n {
            let x = input.row(i);
            let z = pre.row_mut(i);
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = dot(self.weights.row(j), x) + self.biases[j];
            }
        }
        let mut post = pre.clone();
        for v in post.data_mut() {
            *v = self.activation.apply(*v);
        }
        Ok((pre, post))
    }

    /// Gradients w.r.t. this layer's parameters and its input, given
    /// `grad_output = dL/d(output)`.
    pub fn backward(
        &self,
        input: &Tensor2,
        output: &Tensor2,
        grad_output: &Tensor2,
    ) -> Result<(LayerGrads, Tensor2)> {
        let n = input.rows();
        let expect = (n, self.out_dim());
        if input.cols() != self.in_dim() || output.shape() != expect {
            return Err(Error::shape(
                "DenseLayer::backward cached activations",
                format!(
                    "{n}x{} input, {}x{} output",
                    self.in_dim(),
                    expect.0,
                    expect.1
                ),
                format!(
                    "{}x{} input, {}x{} output",
                    input.rows(),
                    input.cols(),
                    output.rows(),
                    output.cols()
                ),
            ));
        }
        if grad_output.shape() != expect {
            return Err(Error::shape(
                "DenseLayer::backward gradient",
                format!("{}x{}", expect.0, expect.1),
                format!("{}x{}", grad_output.rows(), grad_output.cols()),
            ));
        }

        // delta = dL/dz
        let mut delta = grad_output.clone();
        for (d, &y) in delta.data_mut().iter_mut().zip(output.data()) {
            *d *= self.activation.derivative_from_output(y);
        }

        let in_dim = self.in_dim();
        let mut gw = Tensor2::zeros(self.out_dim(), in_dim);
        let mut gb = vec![0.0; self.out_dim()];
        let mut gx = Tensor2::zeros(n, in_dim);
        for i in 0..n {
            let x = input.row(i);
            let d = delta.row(i);
            let gx_row = gx.row_mut(i);
            for (j, &dj) in d.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                gb[j] += dj;
                axpy(dj, x, gw.row_mut(j));
                axpy(dj, self.weights.row(j), gx_row);
            }
        }
        Ok((
            LayerGrads {
                weights: gw,
                biases: gb,
            },
            gx,
        ))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    input_dim: usize,
    layers: Vec<DenseLayer>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub input: Tensor2,
    /// Output of every layer, last one is the network output.
    pub outputs: Vec<Tensor2>,
}

impl Activations {
    pub fn output(&self) -> &Tensor2 {
        self.outputs.last().unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    /// dL/d(input batch).
    pub input: Tensor2,
}

impl Gradients {
    /// Flat views in the order of [`DenseNetwork::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.data(), g.biases.as_slice()])
            .collect()
    }
}

impl DenseNetwork {
    /// One layer per entry of `layer_sizes`, Glorot-initialized from `rng`.
    pub fn init(
        layer_sizes: &[usize],
        input_dim: usize,
        activations: &[Activation],
        rng: &mut RngStream,
    ) -> Result<Self> {
        if layer_sizes.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if input_dim == 0 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        if activations.len() != layer_sizes.len() {
            return Err(Error::shape(
                "DenseNetwork::init activation plan",
                layer_sizes.len(),
                activations.len(),
            ));
        }
        let mut layers = Vec::with_capacity(layer_sizes.len());
        let mut fan_in = input_dim;
        for (i, (&size, &act)) in layer_sizes.iter().zip(activations).enumerate() {
            if size == 0 {
                return Err(Error::Config(format!("layer {i} has zero width")));
            }
            layers.push(DenseLayer::glorot(fan_in, size, act, rng)?);
            fan_in = size;
        }
        Ok(Self { input_dim, layers })
    }

    /// ReLU hidden layers and a Sigmoid output layer.
    pub fn classifier(
        layer_sizes: &[usize],
        input_dim: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        Self::init(
            layer_sizes,
            input_dim,
            &classifier_activations(layer_sizes.len()),
            rng,
        )
    }

    pub fn from_layers(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::shape(
                    if i == 0 {
                        "DenseNetwork first layer vs input_dim"
                    } else {
                        "DenseNetwork consecutive layers"
                    },
                    width,
                    layer.in_dim(),
                ));
            }
            width = layer.out_dim();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_dim, DenseLayer::out_dim)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// `[w0, b0, w1, b1, ...]`
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.data(), l.biases.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(DenseLayer::params_mut)
            .collect()
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn forward(&self, batch: &Tensor2) -> Result<Activations> {
        if batch.cols() != self.input_dim {
            return Err(Error::shape(
                "DenseNetwork::forward batch columns",
                self.input_dim,
                batch.cols(),
            ));
        }
        let mut outputs: Vec<Tensor2> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = outputs.last().unwrap_or(batch);
            let (_, post) = layer.forward(input)?;
            outputs.push(post);
        }
        Ok(Activations {
            input: batch.clone(),
            outputs,
        })
    }

    pub fn predict(&self, batch: &Tensor2) -> Result<Tensor2> {
        let mut acts = self.forward(batch)?;
        Ok(acts.outputs.pop().expect("network has layers"))
    }

    /// Backpropagate `loss_grad = dL/d(output)` through the cached activations.
    pub fn backward(&self, acts: &Activations, loss_grad: &Tensor2) -> Result<Gradients> {
        if acts.outputs.len() != self.layers.len() {
            return Err(Error::shape(
                "DenseNetwork::backward activation count",
                self.layers.len(),
                acts.outputs.len(),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = loss_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = if i == 0 {
                &acts.input
            } else {
                &acts.outputs[i - 1]
            };
            let (g, gx) = layer.backward(input, &acts.outputs[i], &upstream)?;
            grads.push(g);
            upstream = gx;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: upstream,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|x| x.is_finite()))
    }
}

pub fn classifier_activations(depth: usize) -> Vec<Activation> {
    (0..depth)
        .map(|i| {
            if i + 1 == depth {
                Activation::Sigmoid
            } else {
                Activation::ReLU
            }
        })
        .collect()
}
