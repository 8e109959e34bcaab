use crate::error::{Error, Result};
use crate::layers::GradBuffers;
use crate::math::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moments per parameter tensor plus the step counter.
/// Moments are allocated on the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub g: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            g: Vec::new(),
        }
    }

    fn ensure_moments(&mut self, params: &[&mut Tensor]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.g = self.m.clone();
            return Ok(());
        }
        if self.m.len() != params.len() {
            return Err(Error::Shape {
                expected: vec![self.m.len()],
                actual: vec![params.len()],
            });
        }
        for (m, p) in self.m.iter().zip(params) {
            if m.shape() != p.shape() {
                return Err(Error::Shape {
                    expected: m.shape().to_vec(),
                    actual: p.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// One Adam update:
///
/// ```text
/// M ← β1 M + (1 − β1) g
/// G ← β2 G + (1 − β2) g²
/// θ ← θ − α (M / (1 − β1ᵗ)) / (sqrt(G / (1 − β2ᵗ)) + ε)
/// ```
///
/// Row-sparse gradient buffers only update the rows they touched; the
/// moments of other rows are left as they are (no decay), while `t` is
/// global.
pub fn adam_step(params: Vec<&mut Tensor>, grads: &GradBuffers, state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Shape {
            expected: vec![params.len()],
            actual: vec![grads.len()],
        });
    }
    for (i, p) in params.iter().enumerate() {
        grads.check_shape(i, p.shape())?;
    }
    state.ensure_moments(&params)?;
    state.t += 1;
    let AdamConfig {
        alpha,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.t as f64;
    let c1 = 1.0 - beta1.powf(t);
    let c2 = 1.0 - beta2.powf(t);

    for (i, param) in params.into_iter().enumerate() {
        let buf = &grads.buffers[i];
        let w = param.row_len();
        let theta = param.data_mut();
        let m = state.m[i].data_mut();
        let g2 = state.g[i].data_mut();
        let grad = buf.data();
        let mut update = |j: usize| {
            let g = grad[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            g2[j] = beta2 * g2[j] + (1.0 - beta2) * g * g;
            theta[j] -= alpha * (m[j] / c1) / ((g2[j] / c2).sqrt() + epsilon);
        };
        match buf.touched_rows() {
            Some(rows) => {
                for &r in rows {
                    (r * w..(r + 1) * w).for_each(&mut update);
                }
            }
            None => (0..grad.len()).for_each(update),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::GradBuffer;

    fn scalar_grads(g: f64) -> GradBuffers {
        let mut b = GradBuffer::dense(&[1]);
        b.data_mut()[0] = g;
        GradBuffers {
            names: vec!["x".into()],
            buffers: vec![b],
        }
    }

    #[test]
    fn first_step_moves_by_alpha() {
        let mut x = Tensor::zeros(&[1]);
        let mut st = AdamState::new(AdamConfig {
            alpha: 0.01,
            ..AdamConfig::default()
        });
        adam_step(vec![&mut x], &scalar_grads(1.0), &mut st).unwrap();
        assert!((x.data()[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut x = Tensor::filled(&[1], 3.5);
        let mut st = AdamState::new(AdamConfig::default());
        adam_step(vec![&mut x], &scalar_grads(0.0), &mut st).unwrap();
        assert_eq!(x.data()[0], 3.5);
    }

    #[test]
    fn five_steps_follow_recurrence() {
        let gs = [0.5, -1.0, 2.0, 0.25, -0.75];
        let cfg = AdamConfig {
            alpha: 0.1,
            ..AdamConfig::default()
        };
        let mut x = Tensor::filled(&[1], 1.0);
        let mut st = AdamState::new(cfg);
        let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for (t, &g) in gs.iter().enumerate() {
            adam_step(vec![&mut x], &scalar_grads(g), &mut st).unwrap();
            let t = (t + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.99 * v + 0.01 * g * g;
            theta -= 0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.99f64.powi(t))).sqrt() + 1e-8);
            assert!((x.data()[0] - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_rows_are_lazy() {
        let mut x = Tensor::filled(&[3, 2], 1.0);
        let mut st = AdamState::new(AdamConfig {
            alpha: 0.1,
            ..AdamConfig::default()
        });
        let mut b = GradBuffer::row_sparse(&[3, 2]);
        b.row_mut(1).copy_from_slice(&[1.0, -1.0]);
        let grads = GradBuffers {
            names: vec!["e".into()],
            buffers: vec![b],
        };
        adam_step(vec![&mut x], &grads, &mut st).unwrap();
        assert_eq!(x.row(0), &[1.0, 1.0]);
        assert_eq!(x.row(2), &[1.0, 1.0]);
        assert!(x.row(1)[0] < 1.0 && x.row(1)[1] > 1.0);
        assert_eq!(st.g[0].row(0), &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut x = Tensor::zeros(&[2]);
        let mut st = AdamState::new(AdamConfig::default());
        assert!(adam_step(vec![&mut x], &scalar_grads(1.0), &mut st).is_err());
    }
}
