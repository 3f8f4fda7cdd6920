//! Minimal feed-forward network engine.
//!
//! A network is a stack of dense layers with ReLU between them and either a
//! linear or a softmax output head. Gradients are computed by hand-written
//! reverse mode over a [`Trace`] recorded during the forward pass, and
//! parameters are updated with [`Adam`]. Weights are stored row-major with
//! shape `(outputs, inputs)`.

mod adam;
pub mod checkpoint;

pub use adam::Adam;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    Linear,
    /// Output is a probability vector.
    Softmax,
}

/// Network topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_head: OutputHead,
}

impl NetSpec {
    pub fn new(layer_sizes: Vec<usize>, output_head: OutputHead) -> Result<Self> {
        let spec = NetSpec {
            layer_sizes,
            hidden_activation: Activation::Relu,
            output_head,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> hidden... -> output`
    pub fn mlp(input: usize, hidden: &[usize], output: usize, output_head: OutputHead) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, output_head)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config("a network needs at least an input and an output layer"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::config(format!("layer sizes must be positive: {:?}", self.layer_sizes)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Parameters of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `(outputs, inputs)`.
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![S::zero(); inputs * outputs],
            biases: vec![S::zero(); outputs],
        }
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[S] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    #[inline]
    fn apply(&self, x: &[S], out: &mut Vec<S>) {
        out.clear();
        out.extend(
            (0..self.outputs).map(|o| dot(self.row(o), x) + self.biases[o]),
        );
    }
}

/// Weights and biases of every layer plus a version counter that every
/// optimizer step increments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<S> {
    layers: Vec<Dense<S>>,
    version: u64,
}

impl<S: Scalar> ParamSet<S> {
    pub fn zeros(spec: &NetSpec) -> Self {
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        ParamSet { layers, version: 0 }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = S::lit(rng.gen_range(-bound..=bound));
            }
        }
        params
    }

    /// Rebuilds a parameter set from the flat layout used by [`ParamSet::to_flat`].
    pub fn from_flat(spec: &NetSpec, flat: &[S], version: u64) -> Result<Self> {
        if flat.len() != spec.num_params() {
            return Err(Error::config(format!(
                "expected {} parameters for {:?}, got {}",
                spec.num_params(),
                spec.layer_sizes,
                flat.len()
            )));
        }
        let mut params = Self::zeros(spec);
        for (dst, src) in params.iter_mut().zip(flat) {
            *dst = *src;
        }
        params.version = version;
        Ok(params)
    }

    /// Layer by layer, weights (row-major) then biases.
    pub fn to_flat(&self) -> Vec<S> {
        self.iter().copied().collect()
    }

    pub fn layers(&self) -> &[Dense<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<S>] {
        &mut self.layers
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn matches(&self, spec: &NetSpec) -> bool {
        self.layers.len() == spec.num_layers()
            && self
                .layers
                .iter()
                .zip(spec.layer_sizes.windows(2))
                .all(|(l, w)| l.inputs == w[0] && l.outputs == w[1])
    }

    pub fn same_shape(&self, other: &ParamSet<S>) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn fill_zero(&mut self) {
        for v in self.iter_mut() {
            *v = S::zero();
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &ParamSet<S>, alpha: S) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(alpha, &b.weights, &mut a.weights);
            axpy(alpha, &b.biases, &mut a.biases);
        }
    }

    pub fn scale(&mut self, alpha: S) {
        for v in self.iter_mut() {
            *v *= alpha;
        }
    }

    pub fn max_abs_diff(&self, other: &ParamSet<S>) -> S {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), |m, v| if v > m { v } else { m })
    }

    pub fn sq_norm(&self) -> S {
        self.iter().map(|v| *v * *v).sum()
    }
}

/// Activations recorded by [`Mlp::forward_traced`], consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct Trace<S> {
    param_version: u64,
    /// `activations[0]` is the input; `activations[l]` is the post-activation
    /// output of hidden layer `l`. The last entry holds the pre-head logits.
    activations: Vec<Vec<S>>,
    output: Vec<S>,
}

impl<S: Scalar> Trace<S> {
    pub fn output(&self) -> &[S] {
        &self.output
    }

    pub fn logits(&self) -> &[S] {
        self.activations.last().expect("trace has logits")
    }

    pub fn input(&self) -> &[S] {
        &self.activations[0]
    }
}

/// A network: topology plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    spec: NetSpec,
    params: ParamSet<S>,
}

impl<S: Scalar> Mlp<S> {
    pub fn new(spec: NetSpec, params: ParamSet<S>) -> Result<Self> {
        spec.validate()?;
        if !params.matches(&spec) {
            return Err(Error::config(format!(
                "parameters do not match topology {:?}",
                spec.layer_sizes
            )));
        }
        Ok(Mlp { spec, params })
    }

    pub fn init<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = ParamSet::init(&spec, rng);
        Ok(Mlp { spec, params })
    }

    pub fn zeros(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let params = ParamSet::zeros(&spec);
        Ok(Mlp { spec, params })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.params.version
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    fn check_input(&self, input: &[S]) -> Result<()> {
        if input.len() != self.spec.input_dim() {
            return Err(Error::config(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    fn head(&self, logits: &[S]) -> Vec<S> {
        match self.spec.output_head {
            OutputHead::Linear => logits.to_vec(),
            OutputHead::Softmax => crate::scalar::softmax_with_temperature(logits, S::one()),
        }
    }

    /// Pre-head output of the final layer.
    pub fn logits(&self, input: &[S]) -> Result<Vec<S>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.params.layers.len() - 1;
        for (l, layer) in self.params.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l < last {
                relu_in_place(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward(&self, input: &[S]) -> Result<Vec<S>> {
        let logits = self.logits(input)?;
        Ok(self.head(&logits))
    }

    pub fn forward_traced(&self, input: &[S]) -> Result<Trace<S>> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.params.layers.len() + 1);
        activations.push(input.to_vec());
        let last = self.params.layers.len() - 1;
        for (l, layer) in self.params.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(activations.last().expect("non-empty"), &mut out);
            if l < last {
                relu_in_place(&mut out);
            }
            activations.push(out);
        }
        let output = self.head(activations.last().expect("non-empty"));
        Ok(Trace {
            param_version: self.params.version,
            activations,
            output,
        })
    }

    fn check_trace(&self, trace: &Trace<S>, grad_len: usize) -> Result<()> {
        if trace.param_version != self.params.version
            || trace.activations.len() != self.params.layers.len() + 1
            || trace.activations[0].len() != self.spec.input_dim()
        {
            return Err(Error::usage(
                "no forward context for the current parameters; call forward_traced first",
            ));
        }
        if grad_len != self.spec.output_dim() {
            return Err(Error::config(format!(
                "output gradient length {} does not match network output {}",
                grad_len,
                self.spec.output_dim()
            )));
        }
        Ok(())
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient with respect to the network output.
    pub fn backward(&self, trace: &Trace<S>, output_grad: &[S]) -> Result<ParamSet<S>> {
        let mut grads = ParamSet::zeros(&self.spec);
        self.accumulate_backward(trace, output_grad, S::one(), &mut grads)?;
        Ok(grads)
    }

    /// `grads += scale * d loss / d params` where `output_grad` is taken with
    /// respect to the network output (post-head).
    pub fn accumulate_backward(
        &self,
        trace: &Trace<S>,
        output_grad: &[S],
        scale: S,
        grads: &mut ParamSet<S>,
    ) -> Result<()> {
        self.check_trace(trace, output_grad.len())?;
        let logit_grad = match self.spec.output_head {
            OutputHead::Linear => output_grad.to_vec(),
            OutputHead::Softmax => {
                let p = &trace.output;
                let gp: S = output_grad.iter().zip(p).map(|(g, p)| *g * *p).sum();
                p.iter().zip(output_grad).map(|(p, g)| *p * (*g - gp)).collect()
            }
        };
        self.backprop_logits(trace, logit_grad, scale, grads)
    }

    /// Same as [`Mlp::accumulate_backward`] but with the gradient taken with
    /// respect to the pre-head logits. For a softmax head with cross-entropy
    /// loss this is `p - onehot(target)`.
    pub fn accumulate_backward_logits(
        &self,
        trace: &Trace<S>,
        logit_grad: &[S],
        scale: S,
        grads: &mut ParamSet<S>,
    ) -> Result<()> {
        self.check_trace(trace, logit_grad.len())?;
        self.backprop_logits(trace, logit_grad.to_vec(), scale, grads)
    }

    fn backprop_logits(
        &self,
        trace: &Trace<S>,
        mut delta: Vec<S>,
        scale: S,
        grads: &mut ParamSet<S>,
    ) -> Result<()> {
        if !grads.matches(&self.spec) {
            return Err(Error::config("gradient buffer does not match topology"));
        }
        for l in (0..self.params.layers.len()).rev() {
            let layer = &self.params.layers[l];
            let input = &trace.activations[l];
            let g = &mut grads.layers[l];
            for o in 0..layer.outputs {
                let d = delta[o] * scale;
                if d != S::zero() {
                    axpy(d, input, &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs]);
                }
                g.biases[o] += d;
            }
            if l > 0 {
                let mut prev = vec![S::zero(); layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d != S::zero() {
                        axpy(d, layer.row(o), &mut prev);
                    }
                }
                // ReLU derivative: the recorded activation is positive iff the pre-activation was.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= S::zero() {
                        *p = S::zero();
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }
}

#[inline]
fn relu_in_place<S: Scalar>(v: &mut [S]) {
    for x in v {
        if *x < S::zero() {
            *x = S::zero();
        }
    }
}
