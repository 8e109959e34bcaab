//! Seeded synthetic click logs with known structure.
//!
//! - [`xor_parity`]: two fields whose categories fall into hidden groups;
//!   the label is the parity of the two groups. No single field carries
//!   any signal, so a linear model sits at chance.
//! - [`separable`]: one field decides the label outright.
//! - [`ctr_surrogate`]: long-tailed categorical fields plus two numerical
//!   ones, with planted main effects, low-rank pairwise effects and a
//!   three-way parity that no pairwise model can express.

use crate::data::{FeatureSchema, Field, FieldKind, RawRecord};
use crate::error::{Error, Result};
use crate::math::{sigmoid, Rng};

#[derive(Debug, Clone)]
pub struct SynthData {
    pub schema: FeatureSchema,
    pub records: Vec<RawRecord>,
}

impl SynthData {
    pub fn positive_rate(&self) -> f64 {
        let pos = self.records.iter().filter(|r| r.label == 1).count();
        pos as f64 / self.records.len().max(1) as f64
    }
}

fn categorical_schema(names: &[&str]) -> Result<FeatureSchema> {
    FeatureSchema::categorical(names)
}

/// Balanced hidden groups: category `c` of a field belongs to group
/// `c % 2` after a seeded shuffle of category ids.
fn hidden_groups(categories: usize, rng: &mut Rng) -> Vec<u8> {
    let mut g: Vec<u8> = (0..categories).map(|c| (c % 2) as u8).collect();
    rng.shuffle(&mut g);
    g
}

/// `label = group(a) XOR group(b)`; a fraction `noise` of the records then
/// get a fresh fair-coin label instead.
pub fn xor_parity(n: usize, categories: usize, noise: f64, seed: u64) -> Result<SynthData> {
    if categories < 2 || categories % 2 != 0 {
        return Err(Error::invalid("xor_parity needs an even number (>= 2) of categories"));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid("noise must be in [0, 1]"));
    }
    let mut rng = Rng::new(seed);
    let ga = hidden_groups(categories, &mut rng);
    let gb = hidden_groups(categories, &mut rng);
    let records = (0..n)
        .map(|_| {
            let a = rng.below(categories);
            let b = rng.below(categories);
            // both draws always happen so the stream does not depend on `noise`
            let relabel = rng.bernoulli(noise);
            let coin = u8::from(rng.bernoulli(0.5));
            let label = if relabel { coin } else { ga[a] ^ gb[b] };
            RawRecord {
                values: vec![format!("a{a}"), format!("b{b}")],
                label,
            }
        })
        .collect();
    Ok(SynthData {
        schema: categorical_schema(&["left", "right"])?,
        records,
    })
}

/// Three categorical fields; `label = 1` iff the first field's category
/// is in its lower half. Linearly separable.
pub fn separable(n: usize, seed: u64) -> Result<SynthData> {
    let mut rng = Rng::new(seed);
    let records = (0..n)
        .map(|_| {
            let a = rng.below(10);
            let b = rng.below(10);
            let c = rng.below(10);
            RawRecord {
                values: vec![format!("a{a}"), format!("b{b}"), format!("c{c}")],
                label: u8::from(a < 5),
            }
        })
        .collect();
    Ok(SynthData {
        schema: categorical_schema(&["site", "device", "slot"])?,
        records,
    })
}

/// Categorical cardinalities of the surrogate, field `c0` first.
pub const SURROGATE_CARDINALITIES: [usize; 8] = [60, 40, 30, 24, 16, 12, 8, 6];
/// Fields joined by the planted three-way parity.
pub const SURROGATE_TRIPLE: [usize; 3] = [1, 3, 5];
/// Field pairs with planted low-rank interactions.
pub const SURROGATE_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (2, 3), (1, 4), (4, 6), (5, 7)];

/// Zipf-like draw over `0..n` with weight `1 / (rank + 2)`.
fn long_tail(cdf: &[f64], rng: &mut Rng) -> usize {
    let u = rng.uniform() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Public-style CTR surrogate: 8 categorical fields with long-tailed
/// category frequencies and 2 numerical fields (5% missing). The logit is
///
/// ```text
/// bias + Σ main(c_f) + 0.4·n0 − 0.3·ln(n1)
///      + Σ_{(f,g) planted} ⟨u_f(c_f), u_g(c_g)⟩
///      + 1.6 · s1·s3·s5
/// ```
///
/// where `u` are rank-3 latent vectors and `s ∈ {±1}` balanced hidden
/// groups, so the three-way term has no pairwise marginal.
pub fn ctr_surrogate(n: usize, seed: u64) -> Result<SynthData> {
    let mut rng = Rng::new(seed);
    let cards = SURROGATE_CARDINALITIES;
    let cdfs: Vec<Vec<f64>> = cards
        .iter()
        .map(|&c| {
            let mut acc = 0.0;
            (0..c)
                .map(|r| {
                    acc += 1.0 / (r as f64 + 2.0);
                    acc
                })
                .collect()
        })
        .collect();
    let main: Vec<Vec<f64>> = cards
        .iter()
        .map(|&c| (0..c).map(|_| rng.uniform_range(-0.5, 0.5)).collect())
        .collect();
    let rank = 3;
    let latent: Vec<Vec<f64>> = cards
        .iter()
        .map(|&c| (0..c * rank).map(|_| rng.uniform_range(-0.9, 0.9)).collect())
        .collect();
    let signs: Vec<Vec<f64>> = cards
        .iter()
        .map(|&c| hidden_groups(c, &mut rng).iter().map(|&g| if g == 1 { 1.0 } else { -1.0 }).collect())
        .collect();

    let mut fields: Vec<Field> = (0..cards.len())
        .map(|f| Field {
            name: format!("c{f}"),
            kind: FieldKind::Categorical,
        })
        .collect();
    for name in ["n0", "n1"] {
        fields.push(Field {
            name: name.to_string(),
            kind: FieldKind::Numerical,
        });
    }
    let schema = FeatureSchema::new(fields)?;

    let bias = -1.2;
    let records = (0..n)
        .map(|_| {
            let cats: Vec<usize> = cdfs.iter().map(|cdf| long_tail(cdf, &mut rng)).collect();
            let n0 = rng.uniform_range(-2.0, 2.0);
            let n1 = (rng.uniform_range(0.0, 3.0)).exp();
            let mut z = bias + 0.4 * n0 - 0.3 * n1.ln();
            for (f, &c) in cats.iter().enumerate() {
                z += main[f][c];
            }
            for &(f, g) in &SURROGATE_PAIRS {
                let uf = &latent[f][cats[f] * rank..(cats[f] + 1) * rank];
                let ug = &latent[g][cats[g] * rank..(cats[g] + 1) * rank];
                z += crate::math::dot(uf, ug);
            }
            let [a, b, c] = SURROGATE_TRIPLE;
            z += 1.6 * signs[a][cats[a]] * signs[b][cats[b]] * signs[c][cats[c]];
            let label = u8::from(rng.bernoulli(sigmoid(z)));

            let mut values: Vec<String> = cats.iter().enumerate().map(|(f, c)| format!("f{f}v{c}")).collect();
            let missing = |rng: &mut Rng| rng.bernoulli(0.05);
            values.push(if missing(&mut rng) { String::new() } else { format!("{n0:.4}") });
            values.push(if missing(&mut rng) { String::new() } else { format!("{n1:.4}") });
            RawRecord { values, label }
        })
        .collect();
    Ok(SynthData { schema, records })
}
