//! Minimal dense-network library with manual backpropagation.
//!
//! Everything downstream (PPO actors and critics, supervised baselines) is
//! built from [`Network`]: a stack of fully connected layers with optional
//! inverted dropout after each hidden activation. The implementation is
//! deliberately plain — row-major `Vec` weight matrices and explicit loops —
//! so that the gradient path can be audited line by line and checked against
//! finite differences.
//!
//! Networks are generic over [`Scalar`]. Training runs in `f32`; the
//! gradient-check oracle instantiates the same code in `f64`, where central
//! differences are meaningful.

mod checkpoint;
mod optim;

pub use checkpoint::{load_network, read_network, save_network, write_network};
pub use optim::{OptimizerKind, OptimizerState};

use crate::error::{Error, Result};
use num_traits::Float;
use rand::Rng;
use std::fmt::Debug;

/// Negative slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Floor applied to shifted logits before exponentiation, keeping softmax
/// outputs strictly positive even in `f32` (`exp(-80)` is normal in both
/// precisions).
const SOFTMAX_EXP_FLOOR: f64 = -80.0;

/// Floating-point element type for network parameters and activations.
pub trait Scalar: Float + Debug + Send + Sync + 'static {
    /// Draw a uniform value in `[0, 1)`.
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` constant (panics only on NaN-free overflow, which no
    /// constant in this crate triggers).
    fn lit(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("scalar constant out of range")
    }

    /// Widen to `f64` for accumulation and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

impl Scalar for f64 {
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

/// Layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    /// Leaky rectifier with slope [`LEAKY_SLOPE`] for negative inputs.
    LeakyRelu,
    /// Softmax over the whole layer; only valid as the final activation.
    Softmax,
}

impl Activation {
    fn is_softmax(self) -> bool {
        matches!(self, Activation::Softmax)
    }
}

/// Whether a forward pass samples dropout masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active; requires a generator for mask sampling.
    Train,
    /// Deterministic pass; dropout is an identity.
    Eval,
}

/// Shape and behavior of one layer, used to build a [`Network`].
#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    /// Probability of zeroing each post-activation unit during training.
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation, dropout_rate: f64) -> Self {
        LayerSpec {
            units,
            activation,
            dropout_rate,
        }
    }
}

/// One fully connected layer: `post = dropout(act(W x + b))`.
#[derive(Debug, Clone)]
pub struct DenseLayer<T: Scalar> {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `(out_dim, in_dim)`: row `i` holds the fan-in weights of
    /// output unit `i`.
    weights: Vec<T>,
    biases: Vec<T>,
    activation: Activation,
    dropout_rate: f64,
}

impl<T: Scalar> DenseLayer<T> {
    /// Build a layer from explicit parameters (used by tests and checkpoint
    /// loading; training code goes through [`Network::new`]).
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<T>,
        biases: Vec<T>,
        activation: Activation,
        dropout_rate: f64,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        if weights.len() != out_dim * in_dim {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix has {} elements, expected {}x{}",
                weights.len(),
                out_dim,
                in_dim
            )));
        }
        if biases.len() != out_dim {
            return Err(Error::DimensionMismatch(format!(
                "bias vector has {} elements, expected {}",
                biases.len(),
                out_dim
            )));
        }
        if !(0.0..=1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {dropout_rate} outside [0, 1]"
            )));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("layer parameters must be finite".into()));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
            dropout_rate,
        })
    }

    /// Kaiming-style uniform initialization: weights from
    /// `U(-sqrt(1/fan_in), +sqrt(1/fan_in))`, biases zero.
    fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = T::lit((1.0 / in_dim as f64).sqrt());
        let two = T::lit(2.0);
        let weights: Vec<T> = (0..out_dim * in_dim)
            .map(|_| (T::uniform01(rng) * two - T::one()) * bound)
            .collect();
        let biases = vec![T::zero(); out_dim];
        DenseLayer::from_parts(in_dim, out_dim, weights, biases, activation, dropout_rate)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    /// Mutable parameter access for optimizers and gradient-check probes.
    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [T] {
        &mut self.biases
    }

    /// `pre = W x + b`.
    fn affine(&self, input: &[T], pre: &mut Vec<T>) {
        pre.clear();
        pre.reserve(self.out_dim);
        for (row, &b) in self.weights.chunks_exact(self.in_dim).zip(&self.biases) {
            pre.push(dot(row, input) + b);
        }
    }

    fn activate(&self, pre: &[T], post: &mut Vec<T>) {
        post.clear();
        post.extend_from_slice(pre);
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => {
                for v in post.iter_mut() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            Activation::LeakyRelu => {
                let slope = T::lit(LEAKY_SLOPE);
                for v in post.iter_mut() {
                    if *v < T::zero() {
                        *v = *v * slope;
                    }
                }
            }
            Activation::Softmax => softmax_in_place(post),
        }
    }

    /// Multiply an upstream post-activation gradient by the activation
    /// Jacobian, producing the pre-activation gradient in place.
    fn activation_backward(&self, pre: &[T], post: &[T], grad: &mut [T]) {
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => {
                for (g, &z) in grad.iter_mut().zip(pre) {
                    if z <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            Activation::LeakyRelu => {
                let slope = T::lit(LEAKY_SLOPE);
                for (g, &z) in grad.iter_mut().zip(pre) {
                    if z <= T::zero() {
                        *g = *g * slope;
                    }
                }
            }
            Activation::Softmax => {
                // dz_i = p_i * (dy_i - sum_j dy_j p_j)
                let mut weighted = T::zero();
                for (&g, &p) in grad.iter().zip(post) {
                    weighted = weighted + g * p;
                }
                for (g, &p) in grad.iter_mut().zip(post) {
                    *g = p * (*g - weighted);
                }
            }
        }
    }
}

/// Numerically stable softmax with an underflow floor: exponents are shifted
/// by the max and clamped at [`SOFTMAX_EXP_FLOOR`], so every output stays
/// strictly positive for finite inputs.
fn softmax_in_place<T: Scalar>(values: &mut [T]) {
    let mut max = values[0];
    for &v in values.iter().skip(1) {
        if v > max {
            max = v;
        }
    }
    let floor = T::lit(SOFTMAX_EXP_FLOOR);
    let mut sum = T::zero();
    for v in values.iter_mut() {
        let shifted = (*v - max).max(floor);
        *v = shifted.exp();
        sum = sum + *v;
    }
    for v in values.iter_mut() {
        *v = *v / sum;
    }
}

/// Dot product with unrolled partial sums; the four independent accumulators
/// let the compiler keep the loop pipelined without reassociating floats on
/// its own.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = k * 4;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in chunks * 4..a.len() {
        tail = tail + a[i] * b[i];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// `out += s * x`.
fn axpy<T: Scalar>(out: &mut [T], s: T, x: &[T]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, &v) in out.iter_mut().zip(x) {
        *o = *o + s * v;
    }
}

/// Intermediate values of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T: Scalar> {
    input: Vec<T>,
    layers: Vec<LayerCache<T>>,
}

#[derive(Debug, Clone)]
struct LayerCache<T: Scalar> {
    /// Pre-activation `W x + b`.
    pre: Vec<T>,
    /// Post-activation, post-dropout output (the next layer's input).
    post: Vec<T>,
    /// Inverted-dropout mask (`0` or `1/(1-rate)`), present only when a mask
    /// was sampled.
    mask: Option<Vec<T>>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct Gradients<T: Scalar> {
    pub layers: Vec<LayerGrads<T>>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads<T: Scalar> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Sum of squared entries, accumulated in `f64`.
    pub fn squared_norm(&self) -> f64 {
        let mut sum = 0.0;
        for layer in &self.layers {
            for &w in layer.weights.iter().chain(layer.biases.iter()) {
                let v = w.as_f64();
                sum += v * v;
            }
        }
        sum
    }

    /// Scale every entry by `s`.
    pub fn scale(&mut self, s: T) {
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = *w * s;
            }
        }
    }

    /// Elementwise `self += other`; shapes must match.
    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::DimensionMismatch(
                "gradient layer counts differ".into(),
            ));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.weights.len() != b.weights.len() || a.biases.len() != b.biases.len() {
                return Err(Error::DimensionMismatch(
                    "gradient layer shapes differ".into(),
                ));
            }
            for (x, &y) in a.weights.iter_mut().zip(&b.weights) {
                *x = *x + y;
            }
            for (x, &y) in a.biases.iter_mut().zip(&b.biases) {
                *x = *x + y;
            }
        }
        Ok(())
    }
}

/// Joint L2 norm over several gradient sets (e.g. actor + critic treated as
/// one parameter vector).
pub fn global_grad_norm<T: Scalar>(parts: &[&Gradients<T>]) -> f64 {
    parts.iter().map(|g| g.squared_norm()).sum::<f64>().sqrt()
}

/// Scale all gradient sets so their joint L2 norm is at most `max_norm`.
///
/// Returns the pre-clip norm. A zero or sub-threshold norm leaves the
/// gradients untouched; `max_norm` must be positive.
pub fn clip_global_norm<T: Scalar>(parts: &mut [&mut Gradients<T>], max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::Config(format!(
            "max_norm must be positive, got {max_norm}"
        )));
    }
    let norm = parts
        .iter()
        .map(|g| g.squared_norm())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = T::lit(max_norm / norm);
        for g in parts.iter_mut() {
            g.scale(scale);
        }
    }
    Ok(norm)
}

/// A stack of dense layers.
#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    input_dim: usize,
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> Network<T> {
    /// Build and initialize a network. Softmax may only appear on the final
    /// layer, and the final layer must not carry dropout.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        specs: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        if specs.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut in_dim = input_dim;
        for (i, spec) in specs.iter().enumerate() {
            let last = i == specs.len() - 1;
            if spec.activation.is_softmax() && !last {
                return Err(Error::Config(format!(
                    "softmax only valid on the final layer, found on layer {i}"
                )));
            }
            if last && spec.dropout_rate != 0.0 {
                return Err(Error::Config(
                    "dropout is not applied to the output layer".into(),
                ));
            }
            layers.push(DenseLayer::init(
                in_dim,
                spec.units,
                spec.activation,
                spec.dropout_rate,
                rng,
            )?);
            in_dim = spec.units;
        }
        Ok(Network { input_dim, layers })
    }

    /// Assemble a network from prebuilt layers, checking the same structural
    /// rules as [`Network::new`].
    pub fn from_layers(input_dim: usize, layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut in_dim = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} expects input dim {}, previous layer provides {in_dim}",
                    layer.in_dim
                )));
            }
            let last = i == layers.len() - 1;
            if layer.activation.is_softmax() && !last {
                return Err(Error::Config(format!(
                    "softmax only valid on the final layer, found on layer {i}"
                )));
            }
            if last && layer.dropout_rate != 0.0 {
                return Err(Error::Config(
                    "dropout is not applied to the output layer".into(),
                ));
            }
            in_dim = layer.out_dim;
        }
        Ok(Network { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    /// Mutable layer access for optimizers and parameter surgery (e.g.
    /// finite-difference probes). Structure — dimensions, activations,
    /// dropout rates — is fixed at construction; only values can change.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    /// Total parameter count (weights + biases).
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input has {} elements, network expects {}",
                input.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Forward pass returning the output and the cache needed for backward.
    ///
    /// `Train` mode samples inverted-dropout masks from `rng` (which is
    /// therefore required), scaling kept units by `1/(1-rate)` so that
    /// expected activations match evaluation mode. `Eval` mode never touches
    /// the generator.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[T],
        mode: Mode,
        mut rng: Option<&mut R>,
    ) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_input(input)?;
        if mode == Mode::Train && rng.is_none() {
            return Err(Error::Contract(
                "Train-mode forward requires a dropout generator".into(),
            ));
        }
        let mut cache = ForwardCache {
            input: input.to_vec(),
            layers: Vec::with_capacity(self.layers.len()),
        };
        let mut current: &[T] = input;
        for layer in &self.layers {
            let mut pre = Vec::new();
            layer.affine(current, &mut pre);
            let mut post = Vec::new();
            layer.activate(&pre, &mut post);
            let mask = if mode == Mode::Train && layer.dropout_rate > 0.0 {
                let rng = rng.as_mut().expect("checked above");
                let rate = T::lit(layer.dropout_rate);
                let keep_scale = T::lit(1.0 / (1.0 - layer.dropout_rate));
                let mask: Vec<T> = (0..layer.out_dim)
                    .map(|_| {
                        if T::uniform01(&mut **rng) < rate {
                            T::zero()
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                for (v, &m) in post.iter_mut().zip(&mask) {
                    *v = *v * m;
                }
                Some(mask)
            } else {
                None
            };
            cache.layers.push(LayerCache { pre, post, mask });
            current = &cache.layers.last().expect("just pushed").post;
        }
        let output = current.to_vec();
        Ok((output, cache))
    }

    /// Deterministic evaluation forward that keeps no cache.
    pub fn infer(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut pre = Vec::new();
        for layer in &self.layers {
            layer.affine(&current, &mut pre);
            layer.activate(&pre, &mut current);
        }
        Ok(current)
    }

    fn check_cache(&self, cache: &ForwardCache<T>) -> Result<()> {
        if cache.input.len() != self.input_dim || cache.layers.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache does not match network shape".into(),
            ));
        }
        for (layer, lc) in self.layers.iter().zip(&cache.layers) {
            if lc.pre.len() != layer.out_dim || lc.post.len() != layer.out_dim {
                return Err(Error::Contract(
                    "forward cache does not match network shape".into(),
                ));
            }
        }
        Ok(())
    }

    /// Backpropagate a gradient of the loss with respect to the network
    /// *output* (post-activation).
    pub fn backward(&self, cache: &ForwardCache<T>, output_grad: &[T]) -> Result<Gradients<T>> {
        self.check_cache(cache)?;
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "output gradient has {} elements, network emits {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut delta = output_grad.to_vec();
        // The final layer has no dropout, so the post-activation gradient
        // passes straight into the activation Jacobian.
        self.layers[last].activation_backward(
            &cache.layers[last].pre,
            &cache.layers[last].post,
            &mut delta,
        );
        self.backprop_from_delta(cache, delta)
    }

    /// Backpropagate a gradient seeded at the final layer's *pre-activation*
    /// values. Losses over softmax outputs (policy gradient, cross-entropy)
    /// have simple closed forms at the logits; seeding there avoids dividing
    /// by probabilities that may underflow.
    pub fn backward_pre_activation(
        &self,
        cache: &ForwardCache<T>,
        logit_grad: &[T],
    ) -> Result<Gradients<T>> {
        self.check_cache(cache)?;
        if logit_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "logit gradient has {} elements, network emits {}",
                logit_grad.len(),
                self.output_dim()
            )));
        }
        self.backprop_from_delta(cache, logit_grad.to_vec())
    }

    /// Shared backward walk: `delta` is the gradient at the final layer's
    /// pre-activation.
    fn backprop_from_delta(
        &self,
        cache: &ForwardCache<T>,
        mut delta: Vec<T>,
    ) -> Result<Gradients<T>> {
        let mut grads: Vec<LayerGrads<T>> = self
            .layers
            .iter()
            .map(|l| LayerGrads {
                weights: vec![T::zero(); l.weights.len()],
                biases: vec![T::zero(); l.out_dim],
            })
            .collect();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input: &[T] = if k == 0 {
                &cache.input
            } else {
                &cache.layers[k - 1].post
            };
            // Parameter gradients: dW = delta ⊗ input, db = delta.
            let lg = &mut grads[k];
            for (i, &d) in delta.iter().enumerate() {
                axpy(&mut lg.weights[i * layer.in_dim..(i + 1) * layer.in_dim], d, input);
                lg.biases[i] = lg.biases[i] + d;
            }
            if k == 0 {
                break;
            }
            // Input gradient: d_input = W^T delta, walked row-wise so memory
            // access stays sequential.
            let mut upstream = vec![T::zero(); layer.in_dim];
            for (i, &d) in delta.iter().enumerate() {
                axpy(
                    &mut upstream,
                    d,
                    &layer.weights[i * layer.in_dim..(i + 1) * layer.in_dim],
                );
            }
            // Through the previous layer's dropout mask and activation.
            let prev = &self.layers[k - 1];
            let pc = &cache.layers[k - 1];
            if let Some(mask) = &pc.mask {
                for (g, &m) in upstream.iter_mut().zip(mask) {
                    *g = *g * m;
                }
            }
            // The cached post includes dropout; the activation Jacobian wants
            // pre-activation values (and, for softmax, raw probabilities —
            // but softmax never appears on hidden layers).
            prev.activation_backward(&pc.pre, &pc.post, &mut upstream);
            delta = upstream;
        }
        Ok(Gradients { layers: grads })
    }

    /// A zero gradient shaped like this network's parameters.
    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: vec![T::zero(); l.weights.len()],
                    biases: vec![T::zero(); l.out_dim],
                })
                .collect(),
        }
    }

    /// True when every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }
}

/// Convenience builder for the uniform MLP shapes used throughout: `hidden`
/// layers of `width` units with `activation` + dropout, then a linear or
/// softmax head of `out_dim` units.
pub fn mlp_specs(
    hidden: usize,
    width: usize,
    activation: Activation,
    dropout_rate: f64,
    out_dim: usize,
    head: Activation,
) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden + 1);
    for _ in 0..hidden {
        specs.push(LayerSpec::new(width, activation, dropout_rate));
    }
    specs.push(LayerSpec::new(out_dim, head, 0.0));
    specs
}

#[cfg(test)]
mod tests;
