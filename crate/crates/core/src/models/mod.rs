//! The seven CTR model variants behind one forward/backward interface.
//!
//! | variant  | logit                                                    |
//! |----------|----------------------------------------------------------|
//! | LR       | `w0 + Σ w_i`                                              |
//! | FM       | LR + `Σ_{i<j} ⟨v_i, v_j⟩`                                 |
//! | FNN      | `MLP(concat(E))`                                          |
//! | PNN      | `MLP(concat(E) ∥ {⟨v_i, v_j⟩})`                           |
//! | WideDeep | LR + `MLP(concat(E))`                                     |
//! | DeepFM   | FM + `MLP(concat(E))`, both reading the same table        |
//! | FINN     | LR + `MLP(concat({v_iᵀ W_u v_j}))`                        |
//!
//! Every variant is trained through sigmoid and log loss.

mod config;
mod graph;

pub use config::{ModelConfig, Variant};
pub use graph::{LinearTerm, ModelGraph, Tape};

use crate::layers::pairs;
use crate::math::{dot, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub logit: f64,
    pub probability: f64,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        Self {
            logit,
            probability: sigmoid(logit),
        }
    }
}

/// FM second-order term via `½ Σ_c ((Σ_f v_fc)² − Σ_f v_fc²)`, `O(m k)`.
pub fn fm_pairwise_sum_of_squares(e: &[f64], m: usize, k: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..k {
        let mut s = 0.0;
        let mut sq = 0.0;
        for f in 0..m {
            let v = e[f * k + c];
            s += v;
            sq += v * v;
        }
        total += s * s - sq;
    }
    0.5 * total
}

/// FM second-order term by explicit enumeration of field pairs, `O(m² k)`.
pub fn fm_pairwise_explicit(e: &[f64], m: usize, k: usize) -> f64 {
    pairs(m)
        .map(|(i, j)| dot(&e[i * k..(i + 1) * k], &e[j * k..(j + 1) * k]))
        .sum()
}
