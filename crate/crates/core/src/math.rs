//! Dense containers, seeded randomness, initializers and scalar activations.

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!("tensor extents must be positive, got {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape {
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    /// `n × n` identity matrix.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Length of one row, i.e. the product of every extent after the first.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

/// Seeded pseudo-random source. Identical seeds give bit-identical draws on
/// every platform (ChaCha8 stream).
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw in `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Independent child stream; advances `self` by one draw.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}

/// Glorot/Xavier uniform initialization of a `fan_out × fan_in` matrix.
pub fn xavier_init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid("xavier_init: fan_in and fan_out must be >= 1"));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Tensor::new(vec![fan_out, fan_in], data)
}

pub fn uniform_init(shape: &[usize], low: f64, high: f64, rng: &mut Rng) -> Result<Tensor> {
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::invalid(format!(
            "uniform_init: need finite low < high, got [{low}, {high})"
        )));
    }
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.uniform_range(low, high)).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Largest `f64` strictly below 1.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, evaluated so that neither branch exponentiates a large
/// positive number. The result is clamped to the open interval `(0, 1)`.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inner product. Eight independent partial sums let the compiler use SIMD;
/// the summation order is fixed, so results are reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    #[test]
    fn tensor_rejects_inconsistent_shape() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        let t = Tensor::new(vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn xavier_single_entry_within_bound() {
        let t = xavier_init(1, 1, &mut Rng::new(7)).unwrap();
        assert_eq!(t.shape(), &[1, 1]);
        assert!(t.data()[0].abs() <= 3f64.sqrt());
    }

    #[test]
    fn xavier_variance_matches_glorot() {
        let t = xavier_init(100, 100, &mut Rng::new(1)).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 0.01).abs() <= 0.002, "variance {var}");
    }

    #[test]
    fn xavier_zero_fan_is_error() {
        assert!(matches!(
            xavier_init(0, 3, &mut Rng::new(0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn initializers_are_deterministic() {
        let a = xavier_init(5, 4, &mut Rng::new(42)).unwrap();
        let b = xavier_init(5, 4, &mut Rng::new(42)).unwrap();
        assert_eq!(a, b);
        let a = uniform_init(&[3, 3], -1.0, 1.0, &mut Rng::new(9)).unwrap();
        let b = uniform_init(&[3, 3], -1.0, 1.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_degenerate_range() {
        let eps = 1e-12;
        let t = uniform_init(&[2, 2], 0.0, eps, &mut Rng::new(3)).unwrap();
        assert!(t.data().iter().all(|v| (0.0..eps).contains(v)));
    }

    #[test]
    fn uniform_mean_near_center() {
        let t = uniform_init(&[1000], -0.01, 0.01, &mut Rng::new(11)).unwrap();
        let mean = t.data().iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.002, "mean {mean}");
        assert!(t.data().iter().all(|v| (-0.01..0.01).contains(v)));
    }

    #[test]
    fn uniform_rejects_empty_range() {
        assert!(uniform_init(&[2], 1.0, 1.0, &mut Rng::new(0)).is_err());
        assert!(uniform_init(&[2], 2.0, 1.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // saturated: as close to 1 as f64 can get without reaching it
        let s = sigmoid(100.0);
        assert!(s < 1.0 && s >= ONE_MINUS_ULP);
        assert!(sigmoid(-700.0) > 0.0);
        assert!(sigmoid(700.0).is_finite());
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(-3.0), 0.0);
        assert_eq!(relu(5.0), 5.0);
        assert_eq!(relu(0.0), 0.0);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(x in -700.0f64..700.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sigmoid_monotone(a in -30.0f64..30.0, d in 1e-6f64..10.0) {
            prop_assert!(sigmoid(a + d) > sigmoid(a));
        }

        #[test]
        fn relu_idempotent(x in -1e6f64..1e6) {
            prop_assert_eq!(relu(relu(x)), relu(x));
        }

        #[test]
        fn xavier_respects_bound(fan_in in 1usize..40, fan_out in 1usize..40, seed: u64) {
            let t = xavier_init(fan_in, fan_out, &mut Rng::new(seed)).unwrap();
            let b = (6.0 / (fan_in + fan_out) as f64).sqrt();
            prop_assert!(t.data().iter().all(|v| v.abs() <= b));
        }
    }
}
