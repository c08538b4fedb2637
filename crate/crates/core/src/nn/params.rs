use super::Tensor;
use crate::{Error, Result};

/// Anything that owns trainable tensors in a fixed order.
///
/// The order returned by [`parameters`](Parameterized::parameters) is the
/// contract shared with [`GradientSet`] and the optimizer accumulators.
pub trait Parameterized {
    fn parameters(&self) -> Vec<&Tensor>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;

    fn parameter_shapes(&self) -> Vec<Vec<usize>> {
        self.parameters().iter().map(|t| t.shape().to_vec()).collect()
    }

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    /// Concatenated little-endian bytes of every parameter.
    fn parameter_bytes(&self) -> Vec<u8> {
        self.parameters().iter().flat_map(|t| t.to_le_bytes()).collect()
    }
}

/// Gradients mirroring the parameter list of one [`Parameterized`] owner.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    tensors: Vec<Tensor>,
}

impl GradientSet {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    pub fn zeros_like<P: Parameterized + ?Sized>(owner: &P) -> Self {
        Self {
            tensors: owner.parameters().iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Append another set's tensors (e.g. embedding grads followed by MLP grads).
    pub fn chain(mut self, other: GradientSet) -> Self {
        self.tensors.extend(other.tensors);
        self
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::Shape(format!(
                "gradient sets hold {} and {} tensors",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&self, k: f64) -> GradientSet {
        GradientSet::new(self.tensors.iter().map(|t| t.scale(k)).collect())
    }

    /// Check that every tensor matches the owner's parameter shapes.
    pub fn check_congruent<P: Parameterized + ?Sized>(&self, owner: &P) -> Result<()> {
        let params = owner.parameters();
        if params.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} parameters",
                self.tensors.len(),
                params.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(&self.tensors).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "gradient {i} has shape {:?}, parameter has {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
