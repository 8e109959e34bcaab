use super::grad::GradBuffer;
use crate::error::{Error, Result};
use crate::math::Tensor;

/// Per-dimension batch normalization over `B × D` inputs.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`,
/// using the unbiased batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    momentum: f64,
    epsilon: f64,
}

/// What the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub batch: usize,
    train: bool,
}

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

impl BatchNormLayer {
    pub fn new(dim: usize) -> Self {
        Self::with_constants(dim, BN_MOMENTUM, BN_EPSILON)
    }

    pub fn with_constants(dim: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: Tensor::filled(&[dim], 1.0),
            beta: Tensor::zeros(&[dim]),
            running_mean: Tensor::zeros(&[dim]),
            running_var: Tensor::filled(&[dim], 1.0),
            momentum,
            epsilon,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &Tensor {
        &self.gamma
    }

    pub fn beta(&self) -> &Tensor {
        &self.beta
    }

    pub fn gamma_mut(&mut self) -> &mut Tensor {
        &mut self.gamma
    }

    pub fn beta_mut(&mut self) -> &mut Tensor {
        &mut self.beta
    }

    pub(crate) fn gamma_beta_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.gamma, &mut self.beta)
    }

    pub(crate) fn running_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.running_mean, &mut self.running_var)
    }

    pub fn running_mean(&self) -> &Tensor {
        &self.running_mean
    }

    pub fn running_var(&self) -> &Tensor {
        &self.running_var
    }

    pub fn running_mean_mut(&mut self) -> &mut Tensor {
        &mut self.running_mean
    }

    pub fn running_var_mut(&mut self) -> &mut Tensor {
        &mut self.running_var
    }

    fn check_input(&self, x: &[f64], batch: usize) -> Result<()> {
        if batch == 0 || x.len() != batch * self.dim() {
            return Err(Error::Shape {
                expected: vec![batch, self.dim()],
                actual: vec![x.len()],
            });
        }
        Ok(())
    }

    fn affine(&self, xhat: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let (g, b) = (self.gamma.data(), self.beta.data());
        xhat.iter()
            .enumerate()
            .map(|(i, &v)| g[i % d] * v + b[i % d])
            .collect()
    }

    /// Normalizes by the batch statistics. Requires at least two rows.
    pub fn forward_train(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, BatchNormCache)> {
        self.check_input(x, batch)?;
        if batch < 2 {
            return Err(Error::invalid("batch normalization in train mode needs batch size >= 2"));
        }
        let d = self.dim();
        let bf = batch as f64;
        let mut mean = vec![0.0; d];
        for r in 0..batch {
            for c in 0..d {
                mean[c] += x[r * d + c];
            }
        }
        mean.iter_mut().for_each(|m| *m /= bf);
        let mut var = vec![0.0; d];
        for r in 0..batch {
            for c in 0..d {
                var[c] += (x[r * d + c] - mean[c]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= bf);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let xhat: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - mean[i % d]) * inv_std[i % d])
            .collect();
        let out = self.affine(&xhat);
        Ok((
            out,
            BatchNormCache {
                xhat,
                inv_std,
                mean,
                var,
                batch,
                train: true,
            },
        ))
    }

    /// Normalizes by the running statistics.
    pub fn forward_eval(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, BatchNormCache)> {
        self.check_input(x, batch)?;
        let d = self.dim();
        let mean = self.running_mean.data().to_vec();
        let var = self.running_var.data().to_vec();
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let xhat: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - mean[i % d]) * inv_std[i % d])
            .collect();
        let out = self.affine(&xhat);
        Ok((
            out,
            BatchNormCache {
                xhat,
                inv_std,
                mean,
                var,
                batch,
                train: false,
            },
        ))
    }

    /// Folds a train-mode batch's statistics into the running estimates.
    pub fn update_running(&mut self, cache: &BatchNormCache) {
        if !cache.train {
            return;
        }
        let mo = self.momentum;
        let unbias = cache.batch as f64 / (cache.batch as f64 - 1.0);
        for (r, m) in self.running_mean.data_mut().iter_mut().zip(&cache.mean) {
            *r = mo * *r + (1.0 - mo) * m;
        }
        for (r, v) in self.running_var.data_mut().iter_mut().zip(&cache.var) {
            *r = mo * *r + (1.0 - mo) * v * unbias;
        }
    }

    /// Accumulates `∂L/∂γ`, `∂L/∂β` and returns `∂L/∂x`.
    pub fn backward(
        &self,
        cache: &BatchNormCache,
        grad_out: &[f64],
        grad_gamma: &mut GradBuffer,
        grad_beta: &mut GradBuffer,
    ) -> Vec<f64> {
        let d = self.dim();
        let batch = cache.batch;
        let gamma = self.gamma.data();
        let mut sum_g = vec![0.0; d];
        let mut sum_gx = vec![0.0; d];
        for i in 0..batch * d {
            sum_g[i % d] += grad_out[i];
            sum_gx[i % d] += grad_out[i] * cache.xhat[i];
        }
        for (g, s) in grad_gamma.data_mut().iter_mut().zip(&sum_gx) {
            *g += s;
        }
        for (g, s) in grad_beta.data_mut().iter_mut().zip(&sum_g) {
            *g += s;
        }
        if !cache.train {
            return (0..batch * d)
                .map(|i| grad_out[i] * gamma[i % d] * cache.inv_std[i % d])
                .collect();
        }
        let bf = batch as f64;
        (0..batch * d)
            .map(|i| {
                let c = i % d;
                gamma[c] * cache.inv_std[c] / bf * (bf * grad_out[i] - sum_g[c] - cache.xhat[i] * sum_gx[c])
            })
            .collect()
    }
}
