use super::grad::GradBuffer;
use crate::data::EncodedSample;
use crate::error::{Error, Result};
use crate::math::{uniform_init, Rng, Tensor};

/// `n × k` table; row `i` is the latent vector of feature `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    weights: Tensor,
}

/// The `m` looked-up field vectors of one sample, row-major `m × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEmbeddings {
    pub m: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl FieldEmbeddings {
    pub fn new(m: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * k {
            return Err(Error::Shape {
                expected: vec![m, k],
                actual: vec![data.len()],
            });
        }
        Ok(Self { m, k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("field embeddings need equal, non-empty rows"));
        }
        Ok(Self {
            m: rows.len(),
            k,
            data: rows.concat(),
        })
    }

    pub fn field(&self, j: usize) -> &[f64] {
        &self.data[j * self.k..(j + 1) * self.k]
    }
}

impl EmbeddingTable {
    pub fn new(weights: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::invalid("embedding table must be 2-D"));
        }
        if !weights.is_finite() {
            return Err(Error::invalid("embedding table has non-finite entries"));
        }
        Ok(Self { weights })
    }

    /// Uniform `[-range, range)` initialization.
    pub fn uniform(n: usize, k: usize, range: f64, rng: &mut Rng) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("embedding table needs n >= 1 and k >= 1"));
        }
        Self::new(uniform_init(&[n, k], -range, range, rng)?)
    }

    pub fn n(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn k(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.weights.row(i)
    }

    /// Copies the rows of `indices` into `out` (length `indices.len() * k`).
    pub(crate) fn gather(&self, indices: &[usize], out: &mut [f64]) {
        let k = self.k();
        for (j, &i) in indices.iter().enumerate() {
            out[j * k..(j + 1) * k].copy_from_slice(self.weights.row(i));
        }
    }

    pub fn lookup(&self, sample: &EncodedSample) -> Result<FieldEmbeddings> {
        let n = self.n();
        if let Some(&index) = sample.indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        let mut data = vec![0.0; sample.indices.len() * self.k()];
        self.gather(&sample.indices, &mut data);
        FieldEmbeddings::new(sample.indices.len(), self.k(), data)
    }

    /// Scatter-adds field gradients (`m × k`) into the looked-up rows.
    pub fn backward(&self, indices: &[usize], grad_fields: &[f64], grad_table: &mut GradBuffer) {
        let k = self.k();
        for (j, &i) in indices.iter().enumerate() {
            let row = grad_table.row_mut(i);
            for (g, d) in row.iter_mut().zip(&grad_fields[j * k..(j + 1) * k]) {
                *g += d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn lookup_copies_rows() {
        let table = EmbeddingTable::new(Tensor::eye(3)).unwrap();
        let e = table.lookup(&EncodedSample::new(vec![0, 2], 1)).unwrap();
        assert_eq!(e.field(0), &[1.0, 0.0, 0.0]);
        assert_eq!(e.field(1), &[0.0, 0.0, 1.0]);
        assert!(matches!(
            table.lookup(&EncodedSample::new(vec![3, 0], 0)),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
    }

    #[test]
    fn backward_scatters_into_looked_up_rows() {
        let table = EmbeddingTable::new(Tensor::zeros(&[5, 2])).unwrap();
        let mut g = GradBuffer::row_sparse(&[5, 2]);
        table.backward(&[3, 1], &[1.0, 2.0, 3.0, 4.0], &mut g);
        assert_eq!(g.tensor().row(3), &[1.0, 2.0]);
        assert_eq!(g.tensor().row(1), &[3.0, 4.0]);
        for r in [0, 2, 4] {
            assert_eq!(g.tensor().row(r), &[0.0, 0.0]);
        }
        // repeated index accumulates
        table.backward(&[3, 3], &[1.0, 1.0, 1.0, 1.0], &mut g);
        assert_eq!(g.tensor().row(3), &[3.0, 4.0]);
    }

    #[test]
    fn lookup_gradcheck() {
        let mut rng = Rng::new(17);
        let (n, m, k) = (6, 3, 4);
        let table = EmbeddingTable::new(Tensor::new(vec![n, k], random_vec(&mut rng, n * k)).unwrap()).unwrap();
        let sample = EncodedSample::new(vec![4, 0, 2], 0);
        let proj = random_vec(&mut rng, m * k);

        let mut g = GradBuffer::row_sparse(&[n, k]);
        table.backward(&sample.indices, &proj, &mut g);

        let numeric = central_diff(
            |w| {
                let t = EmbeddingTable::new(Tensor::new(vec![n, k], w.to_vec()).unwrap()).unwrap();
                let e = t.lookup(&sample).unwrap();
                e.data.iter().zip(&proj).map(|(a, b)| a * b).sum()
            },
            table.weights().data(),
            STEP,
        );
        assert!(max_rel_err(g.data(), &numeric) < 1e-6);
    }
}
