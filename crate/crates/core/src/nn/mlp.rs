//! MLP forward and backward passes.

use crate::linalg::{dot, Matrix, Vector};
use crate::nn::DropoutSpec;
use crate::rng::Rng;

/// Element-wise activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation. The ReLU
    /// subgradient at exactly zero is taken as 0.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One dense layer: `act(W x + b)` with `W` stored `out x in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vector,
    pub activation: Activation,
}

/// A fully connected network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer gradient buffers matching an [`Mlp`]'s shape.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.data_mut().fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(other.weights.iter()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data().iter()) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            for x in w.data_mut() {
                *x *= s;
            }
        }
        for b in &mut self.biases {
            for x in b.iter_mut() {
                *x *= s;
            }
        }
    }

    /// Global L2 norm over every entry.
    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for w in &self.weights {
            acc += dot(w.data(), w.data());
        }
        for b in &self.biases {
            acc += dot(b, b);
        }
        acc.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.data().iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Recorded forward pass: inputs, pre-activations, post-activation
/// (and post-mask) outputs, and the dropout masks actually drawn.
/// Masks store the multiplier applied to each unit (`0` or `1/(1-p)`),
/// so the backward pass replays exactly the same scaling.
#[derive(Debug, Clone)]
pub struct Cache {
    pub input: Vector,
    pub preacts: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub masks: Vec<Option<Vector>>,
}

impl Cache {
    /// Network output of the recorded pass.
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("cache of an empty network")
    }
}

impl Mlp {
    /// Builds a network from explicit layers. Panics on a broken dimension
    /// chain; construction sites are all internal or test code.
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        assert!(!layers.is_empty(), "network needs at least one layer");
        for pair in layers.windows(2) {
            assert_eq!(
                pair[0].weight.rows(),
                pair[1].weight.cols(),
                "layer dimension chain broken"
            );
        }
        for l in &layers {
            assert_eq!(l.weight.rows(), l.bias.len(), "bias length mismatch");
        }
        Mlp { layers }
    }

    /// Glorot-uniform initialization: weights are drawn row-major per layer
    /// from `U(-s, s)` with `s = sqrt(6 / (fan_in + fan_out))`; biases start
    /// at zero. Hidden layers are ReLU, the output layer is linear.
    pub fn glorot(dims: &[usize], rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "need input and output dimensions");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (idx, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut data = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in * fan_out {
                data.push(rng.uniform(-s, s));
            }
            let activation = if idx + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer {
                weight: Matrix::from_vec(fan_out, fan_in, data),
                bias: vec![0.0; fan_out],
                activation,
            });
        }
        Mlp { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Deterministic forward pass (dropout off).
    pub fn forward(&self, x: &[f64]) -> Vector {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut act: Vector = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.clear();
            next.reserve(layer.bias.len());
            for (row, &b) in layer
                .weight
                .data()
                .chunks_exact(layer.weight.cols())
                .zip(layer.bias.iter())
            {
                next.push(layer.activation.apply(dot(row, &act) + b));
            }
            std::mem::swap(&mut act, &mut next);
        }
        act
    }

    /// Forward pass that records a [`Cache`] for backprop. When `dropout`
    /// is active, hidden-layer outputs are masked with draws from `rng`
    /// (one uniform draw per hidden unit, in layer-then-unit order).
    pub fn forward_with(
        &self,
        x: &[f64],
        dropout: &DropoutSpec,
        mut rng: Option<&mut Rng>,
    ) -> Cache {
        debug_assert_eq!(x.len(), self.input_dim());
        let active = dropout.active();
        if active {
            assert!(
                rng.is_some(),
                "dropout requires a random stream for mask draws"
            );
            assert!((0.0..1.0).contains(&dropout.p), "dropout p must be in [0,1)");
        }
        let keep_scale = if active { 1.0 / (1.0 - dropout.p) } else { 1.0 };
        let mut cache = Cache {
            input: x.to_vec(),
            preacts: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut act: Vector = x.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.bias.len());
            for (row, &b) in layer
                .weight
                .data()
                .chunks_exact(layer.weight.cols())
                .zip(layer.bias.iter())
            {
                pre.push(dot(row, &act) + b);
            }
            let mut out: Vector = pre.iter().map(|&z| layer.activation.apply(z)).collect();
            let hidden = idx + 1 < self.layers.len();
            let mask = if active && hidden {
                let r = rng.as_deref_mut().expect("rng checked above");
                let mask: Vector = out
                    .iter()
                    .map(|_| {
                        if r.uniform01() < dropout.p {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                for (o, &m) in out.iter_mut().zip(mask.iter()) {
                    *o *= m;
                }
                Some(mask)
            } else {
                None
            };
            cache.preacts.push(pre);
            cache.masks.push(mask);
            act = out.clone();
            cache.outputs.push(out);
        }
        cache
    }

    /// Reverse pass. `upstream` is `dL/d(output)`; returns parameter
    /// gradients and `dL/d(input)`.
    pub fn backward(&self, cache: &Cache, upstream: &[f64]) -> (Gradients, Vector) {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_impl(cache, upstream, Some(&mut grads));
        (grads, input_grad)
    }

    /// Reverse pass that only propagates to the input, skipping parameter
    /// gradient accumulation. Used for frozen networks inside larger graphs.
    pub fn backward_input(&self, cache: &Cache, upstream: &[f64]) -> Vector {
        self.backward_impl(cache, upstream, None)
    }

    fn backward_impl(
        &self,
        cache: &Cache,
        upstream: &[f64],
        mut grads: Option<&mut Gradients>,
    ) -> Vector {
        debug_assert_eq!(upstream.len(), self.output_dim());
        let mut delta: Vector = upstream.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            // Through the dropout mask (output-side of the layer).
            if let Some(mask) = &cache.masks[idx] {
                for (d, &m) in delta.iter_mut().zip(mask.iter()) {
                    *d *= m;
                }
            }
            // Through the activation.
            let pre = &cache.preacts[idx];
            for (d, &z) in delta.iter_mut().zip(pre.iter()) {
                *d *= layer.activation.derivative(z);
            }
            let input: &[f64] = if idx == 0 {
                &cache.input
            } else {
                &cache.outputs[idx - 1]
            };
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g.weights[idx];
                let cols = gw.cols();
                for (r, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    let row = &mut gw.data_mut()[r * cols..(r + 1) * cols];
                    for (w, &inp) in row.iter_mut().zip(input.iter()) {
                        *w += dz * inp;
                    }
                }
                for (gb, &dz) in g.biases[idx].iter_mut().zip(delta.iter()) {
                    *gb += dz;
                }
            }
            delta = layer.weight.tr_matvec(&delta);
        }
        delta
    }

    /// Flattens all parameters (per layer: weights row-major, then biases).
    /// Used by finite-difference checks and tests.
    pub fn params_flat(&self) -> Vector {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Writes back a flat parameter vector in [`Mlp::params_flat`] order.
    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut pos = 0;
        for l in &mut self.layers {
            let wlen = l.weight.data().len();
            l.weight.data_mut().copy_from_slice(&flat[pos..pos + wlen]);
            pos += wlen;
            let blen = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + blen]);
            pos += blen;
        }
    }
}
