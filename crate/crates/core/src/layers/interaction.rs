//! Pairwise field-interaction operators.
//!
//! Pairs `(i, j)` with `i < j` are always enumerated lexicographically, so the
//! pair at position `p` is the same on every call.

use super::embedding::FieldEmbeddings;
use super::grad::GradBuffer;
use crate::error::{Error, Result};
use crate::math::{axpy, dot, xavier_init, Rng, Tensor};

pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Lexicographic `(i, j)` pairs with `i < j < m`.
pub fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
}

fn require_pairs(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::invalid(format!("interaction needs at least 2 fields, got {m}")));
    }
    Ok(())
}

/// `v_i · v_j` for every pair.
pub fn inner_product_interaction(e: &FieldEmbeddings) -> Result<Vec<f64>> {
    require_pairs(e.m)?;
    let mut out = vec![0.0; pair_count(e.m)];
    inner_forward(&e.data, e.m, e.k, &mut out);
    Ok(out)
}

pub(crate) fn inner_forward(e: &[f64], m: usize, k: usize, out: &mut [f64]) {
    for (p, (i, j)) in pairs(m).enumerate() {
        out[p] = dot(&e[i * k..(i + 1) * k], &e[j * k..(j + 1) * k]);
    }
}

/// Accumulates `∂L/∂E` given `∂L/∂(pair scalars)`.
pub fn inner_product_backward(e: &FieldEmbeddings, grad_out: &[f64], grad_e: &mut [f64]) {
    inner_backward(&e.data, e.m, e.k, grad_out, grad_e);
}

pub(crate) fn inner_backward(e: &[f64], m: usize, k: usize, grad_out: &[f64], grad_e: &mut [f64]) {
    for (p, (i, j)) in pairs(m).enumerate() {
        let g = grad_out[p];
        if g == 0.0 {
            continue;
        }
        for c in 0..k {
            grad_e[i * k + c] += g * e[j * k + c];
            grad_e[j * k + c] += g * e[i * k + c];
        }
    }
}

/// `v_i ⊙ v_j` for every pair, concatenated (`P × k`).
pub fn elementwise_interaction(e: &FieldEmbeddings) -> Result<Vec<f64>> {
    require_pairs(e.m)?;
    let k = e.k;
    let mut out = vec![0.0; pair_count(e.m) * k];
    for (p, (i, j)) in pairs(e.m).enumerate() {
        for c in 0..k {
            out[p * k + c] = e.data[i * k + c] * e.data[j * k + c];
        }
    }
    Ok(out)
}

pub fn elementwise_backward(e: &FieldEmbeddings, grad_out: &[f64], grad_e: &mut [f64]) {
    let k = e.k;
    for (p, (i, j)) in pairs(e.m).enumerate() {
        for c in 0..k {
            let g = grad_out[p * k + c];
            grad_e[i * k + c] += g * e.data[j * k + c];
            grad_e[j * k + c] += g * e.data[i * k + c];
        }
    }
}

/// In-order concatenation.
pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.concat()
}

/// Slices a concatenated gradient back into per-part gradients.
pub fn split_concat_grad(grad: &[f64], lens: &[usize]) -> Result<Vec<Vec<f64>>> {
    if lens.iter().sum::<usize>() != grad.len() {
        return Err(Error::Shape {
            expected: lens.to_vec(),
            actual: vec![grad.len()],
        });
    }
    let mut out = Vec::with_capacity(lens.len());
    let mut start = 0;
    for &len in lens {
        out.push(grad[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// The `l × k × k` relation tensor. Slice `u` is the `k × k` matrix `W_u`
/// and component `u` of the interaction vector of pair `(i, j)` is
/// `v_iᵀ W_u v_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTensor {
    w: Tensor,
}

impl InteractionTensor {
    pub fn new(w: Tensor) -> Result<Self> {
        let s = w.shape();
        if s.len() != 3 || s[1] != s[2] {
            return Err(Error::invalid(format!("relation tensor must be l × k × k, got {s:?}")));
        }
        Ok(Self { w })
    }

    /// Every slice Xavier-initialized as a `k × k` matrix.
    pub fn xavier(k: usize, l: usize, rng: &mut Rng) -> Result<Self> {
        if l == 0 || k == 0 {
            return Err(Error::invalid("relation tensor needs k >= 1 and l >= 1"));
        }
        let mut data = Vec::with_capacity(l * k * k);
        for _ in 0..l {
            data.extend(xavier_init(k, k, rng)?.into_data());
        }
        Self::new(Tensor::new(vec![l, k, k], data)?)
    }

    /// All `l` slices equal to the identity.
    pub fn identity(k: usize, l: usize) -> Self {
        let mut data = Vec::with_capacity(l * k * k);
        for _ in 0..l {
            data.extend_from_slice(Tensor::eye(k).data());
        }
        Self {
            w: Tensor::new(vec![l, k, k], data).expect("consistent shape"),
        }
    }

    pub fn l(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn k(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.w
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.w
    }

    /// Slice `W_u` as a row-major `k × k` block.
    pub fn slice(&self, u: usize) -> &[f64] {
        let kk = self.k() * self.k();
        &self.w.data()[u * kk..(u + 1) * kk]
    }

    /// Interaction vectors of all pairs, pair-major (`P × l`).
    pub fn forward(&self, e: &FieldEmbeddings) -> Result<Vec<f64>> {
        require_pairs(e.m)?;
        if e.k != self.k() {
            return Err(Error::Shape {
                expected: vec![self.k()],
                actual: vec![e.k],
            });
        }
        let mut out = vec![0.0; pair_count(e.m) * self.l()];
        self.forward_into(&e.data, e.m, &mut out);
        Ok(out)
    }

    /// `t[j][u] = W_u v_j` for every field `j`.
    fn transformed(&self, e: &[f64], m: usize) -> Vec<f64> {
        let (k, l) = (self.k(), self.l());
        let mut t = vec![0.0; m * l * k];
        for j in 0..m {
            let vj = &e[j * k..(j + 1) * k];
            for u in 0..l {
                let wu = self.slice(u);
                let dst = &mut t[(j * l + u) * k..(j * l + u + 1) * k];
                for a in 0..k {
                    dst[a] = dot(&wu[a * k..(a + 1) * k], vj);
                }
            }
        }
        t
    }

    pub(crate) fn forward_into(&self, e: &[f64], m: usize, out: &mut [f64]) {
        let (k, l) = (self.k(), self.l());
        let t = self.transformed(e, m);
        for (p, (i, j)) in pairs(m).enumerate() {
            let vi = &e[i * k..(i + 1) * k];
            for u in 0..l {
                out[p * l + u] = dot(vi, &t[(j * l + u) * k..(j * l + u + 1) * k]);
            }
        }
    }

    /// Accumulates `∂L/∂E` and `∂L/∂W` from `∂L/∂p` (`P × l`):
    /// `∂p_ij[u]/∂v_i = W_u v_j`, `∂p_ij[u]/∂v_j = W_uᵀ v_i`,
    /// `∂p_ij[u]/∂W_u = v_i v_jᵀ`.
    pub fn backward(&self, e: &FieldEmbeddings, grad_out: &[f64], grad_e: &mut [f64], grad_w: &mut GradBuffer) {
        self.backward_raw(&e.data, e.m, grad_out, grad_e, grad_w.data_mut());
    }

    pub(crate) fn backward_raw(&self, e: &[f64], m: usize, grad_out: &[f64], grad_e: &mut [f64], grad_w: &mut [f64]) {
        let (k, l) = (self.k(), self.l());
        let t = self.transformed(e, m);
        // acc[j][u] = Σ_{i<j} g_iju v_i
        let mut acc = vec![0.0; m * l * k];
        for (p, (i, j)) in pairs(m).enumerate() {
            let vi = &e[i * k..(i + 1) * k];
            for u in 0..l {
                let g = grad_out[p * l + u];
                if g == 0.0 {
                    continue;
                }
                axpy(g, &t[(j * l + u) * k..(j * l + u + 1) * k], &mut grad_e[i * k..(i + 1) * k]);
                axpy(g, vi, &mut acc[(j * l + u) * k..(j * l + u + 1) * k]);
            }
        }
        let kk = k * k;
        for j in 1..m {
            let vj = &e[j * k..(j + 1) * k];
            for u in 0..l {
                let a_ju = &acc[(j * l + u) * k..(j * l + u + 1) * k];
                let wu = self.slice(u);
                let gw = &mut grad_w[u * kk..(u + 1) * kk];
                for a in 0..k {
                    let s = a_ju[a];
                    if s == 0.0 {
                        continue;
                    }
                    // grad_vj += W_uᵀ a_ju ; grad_Wu += a_ju v_jᵀ
                    axpy(s, &wu[a * k..(a + 1) * k], &mut grad_e[j * k..(j + 1) * k]);
                    axpy(s, vj, &mut gw[a * k..(a + 1) * k]);
                }
            }
        }
    }
}
