//! Attention-based multiple-instance pooling.
//!
//! For instance rows `h_k` the score is `s_k = w · tanh(V h_k)`; padded rows
//! get an additive `-1e30` mask so their softmax weight underflows to exactly
//! zero. The pooled feature is `z = Σ a_k h_k`.

use rand::Rng;

use super::ImageBag;
use crate::error::{Error, Result};
use crate::nn::{ParamTensor, Parameterized};

const PAD_MASK: f64 = -1e30;

#[derive(Debug, Clone)]
struct AttentionCache {
    /// Real rows only, `[real × width]`.
    rows: Vec<f64>,
    /// `tanh(V h_k)` per real row, `[real × hidden]`.
    hidden: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionPool {
    v: ParamTensor,
    w: ParamTensor,
    cache: Option<AttentionCache>,
}

impl AttentionPool {
    pub fn zeros(width: usize, hidden: usize) -> Self {
        Self {
            v: ParamTensor::zeros(&[hidden, width]),
            w: ParamTensor::zeros(&[hidden]),
            cache: None,
        }
    }

    pub fn glorot<R: Rng + ?Sized>(width: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            v: ParamTensor::glorot(&[hidden, width], width, hidden, rng),
            w: ParamTensor::glorot(&[hidden], hidden, 1, rng),
            cache: None,
        }
    }

    pub fn from_parts(v: ParamTensor, w: ParamTensor) -> Result<Self> {
        if v.shape().len() != 2 || w.shape() != [v.shape()[0]] {
            return Err(Error::InvalidConfig(format!(
                "attention shapes {:?} / {:?} are inconsistent",
                v.shape(),
                w.shape()
            )));
        }
        Ok(Self { v, w, cache: None })
    }

    pub fn width(&self) -> usize {
        self.v.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.v.shape()[0]
    }

    pub fn v(&self) -> &ParamTensor {
        &self.v
    }

    pub fn v_mut(&mut self) -> &mut ParamTensor {
        &mut self.v
    }

    pub fn w(&self) -> &ParamTensor {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut ParamTensor {
        &mut self.w
    }

    fn hidden_of(&self, row: &[f64]) -> Vec<f64> {
        let width = self.width();
        self.v
            .values()
            .chunks_exact(width)
            .map(|vr| vr.iter().zip(row).map(|(a, b)| a * b).sum::<f64>().tanh())
            .collect()
    }

    /// Raw attention scores, masked on padded rows.
    pub fn scores(&self, bag: &ImageBag) -> Result<Vec<f64>> {
        self.check(bag)?;
        Ok((0..bag.rows())
            .map(|k| {
                if k < bag.real_count() {
                    dot(self.w.values(), &self.hidden_of(bag.row(k)))
                } else {
                    PAD_MASK
                }
            })
            .collect())
    }

    fn check(&self, bag: &ImageBag) -> Result<()> {
        if bag.width() != self.width() {
            return Err(Error::DimensionMismatch {
                context: "attention instance width",
                expected: self.width(),
                actual: bag.width(),
            });
        }
        Ok(())
    }

    fn pool(&self, bag: &ImageBag) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check(bag)?;
        let real = bag.real_count();
        let mut hidden = Vec::with_capacity(real * self.hidden());
        let mut scores = Vec::with_capacity(bag.rows());
        for k in 0..bag.rows() {
            if k < real {
                let t = self.hidden_of(bag.row(k));
                scores.push(dot(self.w.values(), &t));
                hidden.extend(t);
            } else {
                scores.push(PAD_MASK);
            }
        }
        let weights = masked_softmax(&scores);
        let mut pooled = vec![0.0; bag.width()];
        for (row, a) in bag.real_rows().zip(&weights) {
            for (z, h) in pooled.iter_mut().zip(row) {
                *z += a * h;
            }
        }
        Ok((pooled, weights, hidden))
    }

    /// Returns the pooled feature and one weight per bag row (zero on padding).
    pub fn apply(&self, bag: &ImageBag) -> Result<(Vec<f64>, Vec<f64>)> {
        let (pooled, weights, _) = self.pool(bag)?;
        Ok((pooled, weights))
    }

    pub fn forward(&mut self, bag: &ImageBag) -> Result<(Vec<f64>, Vec<f64>)> {
        let (pooled, weights, hidden) = self.pool(bag)?;
        let real = bag.real_count();
        self.cache = Some(AttentionCache {
            rows: bag.as_slice()[..real * bag.width()].to_vec(),
            hidden,
            weights: weights[..real].to_vec(),
        });
        Ok((pooled, weights))
    }

    /// Accumulates `dL/dV` and `dL/dw` from `dL/dz`.
    pub fn backward(&mut self, grad_pooled: &[f64]) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or(Error::BackwardWithoutForward("attention pool"))?;
        let (width, hidden) = (self.width(), self.hidden());
        if grad_pooled.len() != width {
            return Err(Error::DimensionMismatch {
                context: "attention pooled gradient",
                expected: width,
                actual: grad_pooled.len(),
            });
        }
        let rows: Vec<&[f64]> = cache.rows.chunks_exact(width).collect();
        let da: Vec<f64> = rows.iter().map(|h| dot(grad_pooled, h)).collect();
        let mean_da: f64 = cache.weights.iter().zip(&da).map(|(a, d)| a * d).sum();

        let w = self.w.values().to_vec();
        for (k, row) in rows.iter().enumerate() {
            let ds = cache.weights[k] * (da[k] - mean_da);
            if ds == 0.0 {
                continue;
            }
            let t = &cache.hidden[k * hidden..(k + 1) * hidden];
            for (gw, ti) in self.w.grad_mut().iter_mut().zip(t) {
                *gw += ds * ti;
            }
            let gv = self.v.grad_mut();
            for i in 0..hidden {
                let du = ds * w[i] * (1.0 - t[i] * t[i]);
                for (g, h) in gv[i * width..(i + 1) * width].iter_mut().zip(row.iter()) {
                    *g += du * h;
                }
            }
        }
        Ok(())
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

impl Parameterized for AttentionPool {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.v, &self.w]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.v, &mut self.w]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn masked_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}
