use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GradientSet, Parameterized, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Fully connected layer computing `activation(x · Wᵀ + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out_dim × in_dim`
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.rows()] {
            return Err(Error::Shape(format!(
                "dense layer weight {:?} and bias {:?} disagree",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weight, bias, activation })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..limit)).collect();
        Self {
            weight: Tensor::from_parts(vec![out_dim, in_dim], w),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn pre_activation(&self, input: &Tensor) -> Result<Tensor> {
        let mut z = input.matmul_nt(&self.weight)?;
        let b = self.bias.data();
        for row in z.data_mut().chunks_exact_mut(b.len()) {
            for (v, bi) in row.iter_mut().zip(b) {
                *v += bi;
            }
        }
        Ok(z)
    }
}

/// Values retained by [`Mlp::forward`] for an exact backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    version: u64,
    dims: Vec<usize>,
    inputs: Vec<Tensor>,
    pre_activations: Vec<Tensor>,
}

impl MlpCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Tensor::rows)
    }
}

/// Ordered stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    // bumped on every mutable parameter access; caches from older versions are stale
    version: u64,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    /// ReLU hidden layers of the given widths; the last layer uses `last`.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, dims: &[usize], last: Activation, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(dims.len());
        let mut prev = in_dim;
        for (i, &d) in dims.iter().enumerate() {
            let act = if i + 1 == dims.len() { last } else { Activation::Relu };
            layers.push(DenseLayer::init(prev, d, act, rng));
            prev = d;
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `[in, hidden..., out]`
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(DenseLayer::out_dim))
            .collect()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, MlpCache)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let z = layer.pre_activation(&x)?;
            let act = layer.activation;
            let y = z.map(|v| act.apply(v));
            inputs.push(x);
            pre_activations.push(z);
            x = y;
        }
        x.ensure_finite("mlp forward")?;
        Ok((
            x,
            MlpCache {
                version: self.version,
                dims: self.dims(),
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without retaining a cache.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            let act = layer.activation;
            x = layer.pre_activation(&x)?.map(|v| act.apply(v));
        }
        x.ensure_finite("mlp forward")?;
        Ok(x)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() != 2 || input.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "MLP expects input width {}, got shape {:?}",
                self.in_dim(),
                input.shape()
            )));
        }
        Ok(())
    }

    /// Reverse-mode pass: parameter gradients (in [`Parameterized`] order)
    /// and the gradient with respect to the forward input.
    pub fn backward(&self, cache: &MlpCache, grad_output: &Tensor) -> Result<(GradientSet, Tensor)> {
        if cache.version != self.version || cache.dims != self.dims() {
            return Err(Error::Cache(
                "cache was produced by a different or since-updated network".into(),
            ));
        }
        let n = cache.batch_size();
        if grad_output.shape() != [n, self.out_dim()] {
            return Err(Error::Shape(format!(
                "grad_output shape {:?}, expected [{n}, {}]",
                grad_output.shape(),
                self.out_dim()
            )));
        }
        let mut grads = Vec::with_capacity(2 * self.layers.len());
        let mut delta = grad_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            if act != Activation::Linear {
                for (d, &z) in delta.data_mut().iter_mut().zip(cache.pre_activations[l].data()) {
                    *d *= act.derivative(z);
                }
            }
            let grad_w = delta.matmul_tn(&cache.inputs[l])?;
            let grad_b = delta.sum_rows()?;
            delta = delta.matmul_nn(&layer.weight)?;
            grads.push(grad_b);
            grads.push(grad_w);
        }
        grads.reverse();
        Ok((GradientSet::new(grads), delta))
    }
}

impl Parameterized for Mlp {
    fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.version += 1;
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }
}
