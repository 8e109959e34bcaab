use crate::error::{Error, Result};
use crate::math::Tensor;

/// Accumulated gradient for one parameter tensor.
///
/// Row-sparse buffers (embedding table, linear weights) remember which rows
/// were written since the last reset so that zeroing and optimizer updates
/// only visit those rows.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    grad: Tensor,
    rows: Option<RowSet>,
}

#[derive(Debug, Clone)]
struct RowSet {
    marked: Vec<bool>,
    list: Vec<usize>,
}

impl GradBuffer {
    pub fn dense(shape: &[usize]) -> Self {
        Self {
            grad: Tensor::zeros(shape),
            rows: None,
        }
    }

    pub fn row_sparse(shape: &[usize]) -> Self {
        let rows = shape[0];
        Self {
            grad: Tensor::zeros(shape),
            rows: Some(RowSet {
                marked: vec![false; rows],
                list: Vec::new(),
            }),
        }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.grad
    }

    pub fn data(&self) -> &[f64] {
        self.grad.data()
    }

    /// Mutable access to the whole buffer. On a row-sparse buffer this marks
    /// every row as touched.
    pub fn data_mut(&mut self) -> &mut [f64] {
        if let Some(rows) = &mut self.rows {
            for r in 0..rows.marked.len() {
                if !rows.marked[r] {
                    rows.marked[r] = true;
                    rows.list.push(r);
                }
            }
        }
        self.grad.data_mut()
    }

    /// Mutable access to one row, marking it touched.
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        if let Some(rows) = &mut self.rows {
            if !rows.marked[row] {
                rows.marked[row] = true;
                rows.list.push(row);
            }
        }
        self.grad.row_mut(row)
    }

    pub fn is_row_sparse(&self) -> bool {
        self.rows.is_some()
    }

    /// Rows written since the last reset, or `None` for dense buffers.
    pub fn touched_rows(&self) -> Option<&[usize]> {
        self.rows.as_ref().map(|r| r.list.as_slice())
    }

    pub fn zero(&mut self) {
        match &mut self.rows {
            None => self.grad.fill(0.0),
            Some(rows) => {
                let w = self.grad.row_len();
                let data = self.grad.data_mut();
                for &r in &rows.list {
                    data[r * w..(r + 1) * w].fill(0.0);
                    rows.marked[r] = false;
                }
                rows.list.clear();
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match &self.rows {
            None => self.grad.data_mut().iter_mut().for_each(|g| *g *= factor),
            Some(rows) => {
                let w = self.grad.row_len();
                let data = self.grad.data_mut();
                for &r in &rows.list {
                    data[r * w..(r + 1) * w].iter_mut().for_each(|g| *g *= factor);
                }
            }
        }
    }
}

/// Named gradient buffers, in the same order as the model's parameters.
#[derive(Debug, Clone)]
pub struct GradBuffers {
    pub names: Vec<String>,
    pub buffers: Vec<GradBuffer>,
}

impl GradBuffers {
    pub fn len(&self) -> usize {
        self.buffers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&GradBuffer> {
        self.names.iter().position(|n| n == name).map(|i| &self.buffers[i])
    }

    pub fn zero(&mut self) {
        self.buffers.iter_mut().for_each(GradBuffer::zero);
    }

    pub fn scale(&mut self, factor: f64) {
        self.buffers.iter_mut().for_each(|b| b.scale(factor));
    }

    /// Checks that buffer `i` matches `shape`.
    pub fn check_shape(&self, i: usize, shape: &[usize]) -> Result<()> {
        let actual = self.buffers[i].grad.shape();
        if actual != shape {
            return Err(Error::Shape {
                expected: shape.to_vec(),
                actual: actual.to_vec(),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.buffers
            .iter()
            .flat_map(|b| b.data().iter())
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}
