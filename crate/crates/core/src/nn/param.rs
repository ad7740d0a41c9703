use rand::Rng;

use crate::error::{Error, Result};

/// A learnable tensor: row-major values plus a same-shape gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "tensor shape {shape:?} must be non-empty with positive extents"
            )));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                context: "tensor values",
                expected: len,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor values"));
        }
        Ok(Self {
            shape: shape.to_vec(),
            grad: vec![0.0; len],
            values,
        })
    }

    /// Glorot-uniform draw in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let mut t = Self::zeros(shape);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut t.values {
            *v = rng.random_range(-limit..limit);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        &mut self.grad
    }

    /// Split borrow of values and gradient.
    pub fn values_and_grad_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.values, &mut self.grad)
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
