use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Vec<f64>,
    output: Vec<f64>,
}

/// `y = activation(W x + b)` with `W` stored row-major as `[out × in]`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    weight: ParamTensor,
    bias: ParamTensor,
    activation: Activation,
    cache: Option<DenseCache>,
}

impl DenseLayer {
    /// All-zero layer.
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: ParamTensor::zeros(&[out_dim, in_dim]),
            bias: ParamTensor::zeros(&[out_dim]),
            activation,
            cache: None,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: ParamTensor::glorot(&[out_dim, in_dim], in_dim, out_dim, rng),
            bias: ParamTensor::zeros(&[out_dim]),
            activation,
            cache: None,
        }
    }

    pub fn from_parts(weight: ParamTensor, bias: ParamTensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::InvalidConfig("dense weight must be 2-d".into()));
        }
        if bias.shape() != [weight.shape()[0]] {
            return Err(Error::DimensionMismatch {
                context: "dense bias",
                expected: weight.shape()[0],
                actual: bias.len(),
            });
        }
        Ok(Self {
            weight,
            bias,
            activation,
            cache: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &ParamTensor {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut ParamTensor {
        &mut self.weight
    }

    pub fn bias(&self) -> &ParamTensor {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut ParamTensor {
        &mut self.bias
    }

    /// Pure evaluation; leaves the layer untouched.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if x.len() != in_dim {
            return Err(Error::DimensionMismatch {
                context: "dense input",
                expected: in_dim,
                actual: x.len(),
            });
        }
        let w = self.weight.values();
        let b = self.bias.values();
        Ok((0..out_dim)
            .map(|o| {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                let z = b[o] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
                self.activation.apply(z)
            })
            .collect())
    }

    /// Evaluation that records the input and output for [`DenseLayer::backward`].
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let output = self.apply(x)?;
        self.cache = Some(DenseCache {
            input: x.to_vec(),
            output: output.clone(),
        });
        Ok(output)
    }

    /// Accumulates parameter gradients from `grad_out = dL/dy` and returns
    /// `dL/dx`. Consumes the cached forward state.
    pub fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>> {
        let cache = self
            .cache
            .take()
            .ok_or(Error::BackwardWithoutForward("dense layer"))?;
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if grad_out.len() != out_dim {
            return Err(Error::DimensionMismatch {
                context: "dense output gradient",
                expected: out_dim,
                actual: grad_out.len(),
            });
        }
        let dz: Vec<f64> = grad_out
            .iter()
            .zip(&cache.output)
            .map(|(g, y)| g * self.activation.derivative_from_output(*y))
            .collect();

        for (gb, d) in self.bias.grad_mut().iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut grad_in = vec![0.0; in_dim];
        let (w, gw) = self.weight.values_and_grad_mut();
        for (o, d) in dz.iter().enumerate() {
            let row = o * in_dim..(o + 1) * in_dim;
            for ((gwi, wi), (xi, gi)) in gw[row.clone()]
                .iter_mut()
                .zip(&w[row])
                .zip(cache.input.iter().zip(grad_in.iter_mut()))
            {
                *gwi += d * xi;
                *gi += d * wi;
            }
        }
        Ok(grad_in)
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

impl Parameterized for DenseLayer {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[f64], b: &[f64], out: usize, act: Activation) -> DenseLayer {
        let inp = w.len() / out;
        DenseLayer::from_parts(
            ParamTensor::from_values(&[out, inp], w.to_vec()).unwrap(),
            ParamTensor::from_values(&[out], b.to_vec()).unwrap(),
            act,
        )
        .unwrap()
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], 2, Activation::Identity);
        assert_eq!(l.apply(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn zero_tanh_layer_outputs_zero() {
        let l = DenseLayer::zeros(3, 4, Activation::Tanh);
        assert_eq!(l.apply(&[0.3, -7.0, 2.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn affine_example() {
        let l = layer(&[1.0, 2.0, 0.0, 1.0], &[1.0, 0.0], 2, Activation::Identity);
        assert_eq!(l.apply(&[1.0, 1.0]).unwrap(), vec![4.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut l = DenseLayer::zeros(3, 2, Activation::Tanh);
        assert!(matches!(
            l.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 2, .. })
        ));
    }

    #[test]
    fn backward_requires_forward() {
        let mut l = DenseLayer::zeros(2, 2, Activation::Identity);
        assert!(matches!(
            l.backward(&[1.0, 1.0]),
            Err(Error::BackwardWithoutForward(_))
        ));
        l.forward(&[1.0, 2.0]).unwrap();
        l.backward(&[1.0, 1.0]).unwrap();
        // the cache is consumed
        assert!(l.backward(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn linear_gradient() {
        // loss = w * x with x = 2
        let mut l = layer(&[0.7], &[0.0], 1, Activation::Identity);
        l.forward(&[2.0]).unwrap();
        let gx = l.backward(&[1.0]).unwrap();
        assert_eq!(l.weight().grad(), &[2.0]);
        assert_eq!(l.bias().grad(), &[1.0]);
        assert_eq!(gx, vec![0.7]);
    }
}
