use super::Mode;
use crate::error::{Error, Result};
use crate::math::Rng;

/// Inverted dropout: in train mode each unit survives with probability
/// `keep_prob` and is scaled by `1 / keep_prob`; eval mode is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutLayer {
    keep_prob: f64,
}

impl DropoutLayer {
    pub fn new(keep_prob: f64) -> Result<Self> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::invalid(format!("keep probability must be in (0, 1], got {keep_prob}")));
        }
        Ok(Self { keep_prob })
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    /// Returns the output and, in train mode with `keep_prob < 1`, the
    /// multiplicative mask (entries `0` or `1 / keep_prob`).
    pub fn forward(&self, h: &[f64], mode: Mode, rng: &mut Rng) -> (Vec<f64>, Option<Vec<f64>>) {
        if mode == Mode::Eval || self.keep_prob == 1.0 {
            return (h.to_vec(), None);
        }
        let scale = 1.0 / self.keep_prob;
        let mask: Vec<f64> = (0..h.len())
            .map(|_| if rng.bernoulli(self.keep_prob) { scale } else { 0.0 })
            .collect();
        let out = h.iter().zip(&mask).map(|(x, m)| x * m).collect();
        (out, Some(mask))
    }

    pub fn backward(grad_out: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
        match mask {
            None => grad_out.to_vec(),
            Some(mask) => grad_out.iter().zip(mask).map(|(g, m)| g * m).collect(),
        }
    }
}
