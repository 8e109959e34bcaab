use std::fmt;
use std::str::FromStr;

use super::grad::GradBuffer;
use crate::error::{Error, Result};
use crate::math::{axpy, dot, relu, sigmoid, xavier_init, Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `pre` whose output is `out`.
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" | "none" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

const ROW_BLOCK: usize = 16;

/// Fully connected layer `act(W h + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weight: Tensor,
    bias: Tensor,
    activation: Activation,
}

/// Per-batch forward record: pre-activations and outputs, both `B × out`.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[0]] {
            return Err(Error::Shape {
                expected: vec![ws[0]],
                actual: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// Xavier weights, zero bias.
    pub fn xavier(d_in: usize, d_out: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        Self::new(xavier_init(d_in, d_out, rng)?, Tensor::zeros(&[d_out]), activation)
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    pub(crate) fn weight_bias_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.weight, &mut self.bias)
    }

    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(h, 1)?.out)
    }

    /// Forward over `batch` row-major inputs of width `d_in`.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<DenseCache> {
        let (d_in, d_out) = (self.d_in(), self.d_out());
        if x.len() != batch * d_in {
            return Err(Error::Shape {
                expected: vec![batch, d_in],
                actual: vec![x.len()],
            });
        }
        let w = self.weight.data();
        let b = self.bias.data();
        let mut pre = vec![0.0; batch * d_out];
        // row blocks keep each weight row hot across several samples
        for r0 in (0..batch).step_by(ROW_BLOCK) {
            let r1 = (r0 + ROW_BLOCK).min(batch);
            for o in 0..d_out {
                let wo = &w[o * d_in..(o + 1) * d_in];
                for r in r0..r1 {
                    pre[r * d_out + o] = dot(wo, &x[r * d_in..(r + 1) * d_in]) + b[o];
                }
            }
        }
        let out = pre.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseCache { pre, out })
    }

    /// Accumulates `∂L/∂W`, `∂L/∂b` and returns `∂L/∂x`.
    pub fn backward_batch(
        &self,
        x: &[f64],
        cache: &DenseCache,
        grad_out: &[f64],
        grad_w: &mut GradBuffer,
        grad_b: &mut GradBuffer,
    ) -> Vec<f64> {
        let (d_in, d_out) = (self.d_in(), self.d_out());
        let batch = cache.out.len() / d_out;
        let w = self.weight.data();
        let mut delta = vec![0.0; batch * d_out];
        for (i, d) in delta.iter_mut().enumerate() {
            *d = grad_out[i] * self.activation.derivative(cache.pre[i], cache.out[i]);
        }
        let gb = grad_b.data_mut();
        for row in delta.chunks(d_out) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        let gw = grad_w.data_mut();
        let mut grad_in = vec![0.0; batch * d_in];
        for r0 in (0..batch).step_by(ROW_BLOCK) {
            let r1 = (r0 + ROW_BLOCK).min(batch);
            for o in 0..d_out {
                let wo = &w[o * d_in..(o + 1) * d_in];
                let gwo = &mut gw[o * d_in..(o + 1) * d_in];
                for r in r0..r1 {
                    let d = delta[r * d_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    axpy(d, wo, &mut grad_in[r * d_in..(r + 1) * d_in]);
                    axpy(d, &x[r * d_in..(r + 1) * d_in], gwo);
                }
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn identity_layer_passes_through() {
        let layer = DenseLayer::new(Tensor::eye(3), Tensor::zeros(&[3]), Activation::Identity).unwrap();
        assert_eq!(layer.forward(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn zero_weights_relu_bias() {
        let layer = DenseLayer::new(
            Tensor::zeros(&[2, 4]),
            Tensor::new(vec![2], vec![1.0, -1.0]).unwrap(),
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(layer.forward(&[0.3, 0.1, 9.0, -4.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let layer = DenseLayer::xavier(3, 2, Activation::Relu, &mut Rng::new(0)).unwrap();
        assert!(layer.forward(&[1.0, 2.0]).is_err());
        assert!(DenseLayer::new(Tensor::zeros(&[2, 3]), Tensor::zeros(&[3]), Activation::Relu).is_err());
    }

    fn gradcheck(act: Activation, seed: u64) -> f64 {
        let mut rng = Rng::new(seed);
        let (d_in, d_out, batch) = (10, 7, 3);
        let w = Tensor::new(vec![d_out, d_in], random_vec(&mut rng, d_in * d_out)).unwrap();
        let b = Tensor::new(vec![d_out], random_vec(&mut rng, d_out)).unwrap();
        let layer = DenseLayer::new(w, b, act).unwrap();
        let x = random_vec(&mut rng, batch * d_in);
        let proj = random_vec(&mut rng, batch * d_out);
        let cache = layer.forward_batch(&x, batch).unwrap();
        // keep relu pre-activations away from the kink
        assert!(cache.pre.iter().all(|z| z.abs() > 1e-3));

        let mut gw = GradBuffer::dense(&[d_out, d_in]);
        let mut gb = GradBuffer::dense(&[d_out]);
        let gx = layer.backward_batch(&x, &cache, &proj, &mut gw, &mut gb);

        let obj = |l: &DenseLayer, x: &[f64]| -> f64 {
            l.forward_batch(x, batch).unwrap().out.iter().zip(&proj).map(|(a, b)| a * b).sum()
        };
        let nx = central_diff(|x| obj(&layer, x), &x, STEP);
        let nw = central_diff(
            |w| {
                let l = DenseLayer::new(Tensor::new(vec![d_out, d_in], w.to_vec()).unwrap(), layer.bias.clone(), act).unwrap();
                obj(&l, &x)
            },
            layer.weight.data(),
            STEP,
        );
        let nb = central_diff(
            |b| {
                let l = DenseLayer::new(layer.weight.clone(), Tensor::new(vec![d_out], b.to_vec()).unwrap(), act).unwrap();
                obj(&l, &x)
            },
            layer.bias.data(),
            STEP,
        );
        max_rel_err(&gx, &nx).max(max_rel_err(gw.data(), &nw)).max(max_rel_err(gb.data(), &nb))
    }

    #[test]
    fn dense_gradcheck_all_activations() {
        for act in [Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::Identity] {
            let err = gradcheck(act, 12);
            assert!(err < 1e-6, "{act}: {err}");
        }
    }

    #[test]
    fn activation_parse() {
        assert_eq!("ReLU".parse::<Activation>().unwrap(), Activation::Relu);
        assert!("swish".parse::<Activation>().is_err());
    }
}
