use super::config::{ModelConfig, Variant};
use super::{fm_pairwise_sum_of_squares, Prediction};
use crate::data::EncodedSample;
use crate::error::{Error, Result};
use crate::layers::{
    inner_product_backward_raw, inner_product_forward_raw, Activation, BatchNormCache,
    BatchNormLayer, DenseCache, DenseLayer, DropoutLayer, EmbeddingTable, GradBuffer, GradBuffers,
    InteractionTensor, Mode,
};
use crate::math::{sigmoid, Rng, Tensor};

/// `w0 + Σ w_i` over the active features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTerm {
    pub bias: Tensor,
    pub weights: Tensor,
}

impl LinearTerm {
    pub fn zeros(n: usize) -> Self {
        Self {
            bias: Tensor::zeros(&[1]),
            weights: Tensor::zeros(&[n]),
        }
    }

    pub fn logit(&self, indices: &[usize]) -> f64 {
        let w = self.weights.data();
        self.bias.data()[0] + indices.iter().map(|&i| w[i]).sum::<f64>()
    }
}

/// Everything a backward pass needs from one batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    mode: Mode,
    batch: usize,
    indices: Vec<usize>,
    emb: Vec<f64>,
    comb: Vec<f64>,
    bn: Option<BatchNormCache>,
    mask: Option<Vec<f64>>,
    mlp_in: Vec<Vec<f64>>,
    mlp: Vec<DenseCache>,
    linear: Vec<f64>,
    fm: Vec<f64>,
    deep: Vec<f64>,
    logits: Vec<f64>,
}

impl Tape {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&z| sigmoid(z)).collect()
    }

    /// Per-sample linear contribution (zero when the variant has none).
    pub fn linear_part(&self) -> &[f64] {
        &self.linear
    }

    /// Per-sample FM second-order contribution.
    pub fn fm_part(&self) -> &[f64] {
        &self.fm
    }

    /// Per-sample MLP output `y_d`.
    pub fn deep_part(&self) -> &[f64] {
        &self.deep
    }

    /// Combination-layer activations (`B × D`) before BN/dropout.
    pub fn combination(&self) -> &[f64] {
        &self.comb
    }

    /// Pre-activations of MLP layer `i` (`B × width`).
    pub fn preactivations(&self, i: usize) -> Option<&[f64]> {
        self.mlp.get(i).map(|c| c.pre.as_slice())
    }

    pub fn bn_cache(&self) -> Option<&BatchNormCache> {
        self.bn.as_ref()
    }
}

/// Positions of each parameter group in [`ModelGraph::params`].
#[derive(Debug, Clone, Copy)]
struct Slots {
    lin: Option<usize>,
    emb: Option<usize>,
    inter: Option<usize>,
    bn: Option<usize>,
    mlp: usize,
}

/// A trainable model of one [`Variant`].
#[derive(Debug, Clone)]
pub struct ModelGraph {
    config: ModelConfig,
    linear: Option<LinearTerm>,
    embeddings: Option<EmbeddingTable>,
    interaction: Option<InteractionTensor>,
    dropout: Option<DropoutLayer>,
    batchnorm: Option<BatchNormLayer>,
    mlp: Vec<DenseLayer>,
    recorded: Option<(EncodedSample, Tape)>,
}

impl ModelGraph {
    /// Fresh model: zero linear term, uniform embeddings, Xavier relation
    /// slices and MLP weights, zero biases. Draw order is embeddings,
    /// relation tensor, MLP.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Self::build(config)
    }

    pub(crate) fn build(config: ModelConfig) -> Result<Self> {
        let mut rng = Rng::new(config.seed);
        let v = config.variant;
        let (n, k) = (config.n_features, config.embed_dim);
        let linear = v.has_linear().then(|| LinearTerm::zeros(n));
        let embeddings = if v.has_embeddings() {
            Some(EmbeddingTable::uniform(n, k, config.embed_init, &mut rng)?)
        } else {
            None
        };
        let interaction = if v == Variant::Finn {
            Some(InteractionTensor::xavier(k, config.interaction_dim, &mut rng)?)
        } else {
            None
        };
        let d = config.combination_dim();
        let deep = v.is_deep();
        let dropout = match config.keep_prob {
            Some(p) if deep && p < 1.0 => Some(DropoutLayer::new(p)?),
            _ => None,
        };
        let batchnorm = (deep && config.use_bn).then(|| BatchNormLayer::new(d));
        let mut mlp = Vec::new();
        if deep {
            let mut d_in = d;
            for &h in &config.hidden_sizes {
                mlp.push(DenseLayer::xavier(d_in, h, config.activation, &mut rng)?);
                d_in = h;
            }
            mlp.push(DenseLayer::xavier(d_in, 1, Activation::Identity, &mut rng)?);
        }
        Ok(Self {
            config,
            linear,
            embeddings,
            interaction,
            dropout,
            batchnorm,
            mlp,
            recorded: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn linear(&self) -> Option<&LinearTerm> {
        self.linear.as_ref()
    }

    pub fn linear_mut(&mut self) -> Option<&mut LinearTerm> {
        self.linear.as_mut()
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    pub fn embeddings_mut(&mut self) -> Option<&mut EmbeddingTable> {
        self.embeddings.as_mut()
    }

    pub fn interaction(&self) -> Option<&InteractionTensor> {
        self.interaction.as_ref()
    }

    pub fn interaction_mut(&mut self) -> Option<&mut InteractionTensor> {
        self.interaction.as_mut()
    }

    pub fn batchnorm(&self) -> Option<&BatchNormLayer> {
        self.batchnorm.as_ref()
    }

    pub fn mlp(&self) -> &[DenseLayer] {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.mlp
    }

    /// Replaces the MLP (hidden layers plus the 1-unit output layer).
    pub fn set_mlp(&mut self, layers: Vec<DenseLayer>) -> Result<()> {
        if !self.variant().is_deep() {
            return Err(Error::invalid(format!("{} has no MLP", self.variant())));
        }
        let mut d_in = self.config.combination_dim();
        for layer in &layers {
            if layer.d_in() != d_in {
                return Err(Error::Shape {
                    expected: vec![layer.d_out(), d_in],
                    actual: layer.weight().shape().to_vec(),
                });
            }
            d_in = layer.d_out();
        }
        if layers.is_empty() || d_in != 1 {
            return Err(Error::invalid("the MLP must end in a single output unit"));
        }
        self.config.hidden_sizes = layers[..layers.len() - 1].iter().map(DenseLayer::d_out).collect();
        self.mlp = layers;
        self.recorded = None;
        Ok(())
    }

    /// Activations of every MLP layer, output layer last.
    pub fn mlp_activations(&self) -> Vec<Activation> {
        self.mlp.iter().map(DenseLayer::activation).collect()
    }

    fn slots(&self) -> Slots {
        let mut next = 0;
        let mut take = |present: bool, width: usize| {
            let at = present.then_some(next);
            if present {
                next += width;
            }
            at
        };
        let lin = take(self.linear.is_some(), 2);
        let emb = take(self.embeddings.is_some(), 1);
        let inter = take(self.interaction.is_some(), 1);
        let bn = take(self.batchnorm.is_some(), 2);
        Slots {
            lin,
            emb,
            inter,
            bn,
            mlp: next,
        }
    }

    /// Parameter names in canonical order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.linear.is_some() {
            names.push("linear.bias".to_string());
            names.push("linear.weight".to_string());
        }
        if self.embeddings.is_some() {
            names.push("embedding".to_string());
        }
        if self.interaction.is_some() {
            names.push("interaction".to_string());
        }
        if self.batchnorm.is_some() {
            names.push("bn.gamma".to_string());
            names.push("bn.beta".to_string());
        }
        for i in 0..self.mlp.len() {
            names.push(format!("mlp.{i}.weight"));
            names.push(format!("mlp.{i}.bias"));
        }
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        if let Some(lin) = &self.linear {
            out.push(&lin.bias);
            out.push(&lin.weights);
        }
        if let Some(e) = &self.embeddings {
            out.push(e.weights());
        }
        if let Some(w) = &self.interaction {
            out.push(w.tensor());
        }
        if let Some(bn) = &self.batchnorm {
            out.push(bn.gamma());
            out.push(bn.beta());
        }
        for layer in &self.mlp {
            out.push(layer.weight());
            out.push(layer.bias());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.recorded = None;
        let mut out = Vec::new();
        if let Some(lin) = &mut self.linear {
            out.push(&mut lin.bias);
            out.push(&mut lin.weights);
        }
        if let Some(e) = &mut self.embeddings {
            out.push(e.weights_mut());
        }
        if let Some(w) = &mut self.interaction {
            out.push(w.tensor_mut());
        }
        if let Some(bn) = &mut self.batchnorm {
            let (g, b) = bn.gamma_beta_mut();
            out.push(g);
            out.push(b);
        }
        for layer in &mut self.mlp {
            let (w, b) = layer.weight_bias_mut();
            out.push(w);
            out.push(b);
        }
        out
    }

    /// Non-trainable state (BN running statistics), name and tensor.
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        match &self.batchnorm {
            Some(bn) => vec![("bn.running_mean", bn.running_mean()), ("bn.running_var", bn.running_var())],
            None => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match &mut self.batchnorm {
            Some(bn) => {
                let (m, v) = bn.running_mut();
                vec![("bn.running_mean", m), ("bn.running_var", v)]
            }
            None => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Zeroed gradient buffers matching [`params`](Self::params); the
    /// linear weights and the embedding table are row-sparse.
    pub fn new_grads(&self) -> GradBuffers {
        let names = self.param_names();
        let buffers = names
            .iter()
            .zip(self.params())
            .map(|(name, t)| {
                if name == "linear.weight" || name == "embedding" {
                    GradBuffer::row_sparse(t.shape())
                } else {
                    GradBuffer::dense(t.shape())
                }
            })
            .collect();
        GradBuffers { names, buffers }
    }

    fn check_sample(&self, s: &EncodedSample) -> Result<()> {
        if s.indices.len() != self.config.n_fields {
            return Err(Error::SchemaMismatch(format!(
                "sample has {} fields, model expects {}",
                s.indices.len(),
                self.config.n_fields
            )));
        }
        let n = self.config.n_features;
        if let Some(&index) = s.indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        Ok(())
    }

    /// Batched forward pass. `rng` drives dropout masks in train mode.
    pub fn forward(&self, batch: &[&EncodedSample], mode: Mode, rng: &mut Rng) -> Result<Tape> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        for s in batch {
            self.check_sample(s)?;
        }
        let b = batch.len();
        let (m, k) = (self.config.n_fields, self.config.embed_dim);
        let v = self.variant();
        let indices: Vec<usize> = batch.iter().flat_map(|s| s.indices.iter().copied()).collect();

        let linear: Vec<f64> = match &self.linear {
            Some(lin) => indices.chunks(m).map(|ix| lin.logit(ix)).collect(),
            None => vec![0.0; b],
        };

        let mut emb = Vec::new();
        if let Some(table) = &self.embeddings {
            emb = vec![0.0; b * m * k];
            table.gather(&indices, &mut emb);
        }

        let fm: Vec<f64> = if v.has_fm_term() {
            emb.chunks(m * k).map(|e| fm_pairwise_sum_of_squares(e, m, k)).collect()
        } else {
            vec![0.0; b]
        };

        let d = self.config.combination_dim();
        let mut comb = Vec::new();
        let mut bn = None;
        let mut mask = None;
        let mut mlp_in = Vec::new();
        let mut mlp = Vec::new();
        let mut deep = vec![0.0; b];
        if v.is_deep() {
            comb = vec![0.0; b * d];
            for (r, e) in emb.chunks(m * k).enumerate() {
                let row = &mut comb[r * d..(r + 1) * d];
                match v {
                    Variant::Fnn | Variant::WideDeep | Variant::DeepFm => row.copy_from_slice(e),
                    Variant::Pnn => {
                        row[..m * k].copy_from_slice(e);
                        inner_product_forward_raw(e, m, k, &mut row[m * k..]);
                    }
                    Variant::Finn => self
                        .interaction
                        .as_ref()
                        .expect("FINN has a relation tensor")
                        .forward_into(e, m, row),
                    Variant::Lr | Variant::Fm => unreachable!(),
                }
            }
            let mut h = comb.clone();
            if let Some(layer) = &self.batchnorm {
                let (out, cache) = match mode {
                    Mode::Train => layer.forward_train(&h, b)?,
                    Mode::Eval => layer.forward_eval(&h, b)?,
                };
                h = out;
                bn = Some(cache);
            }
            if let Some(layer) = &self.dropout {
                let (out, m) = layer.forward(&h, mode, rng);
                h = out;
                mask = m;
            }
            for layer in &self.mlp {
                let cache = layer.forward_batch(&h, b)?;
                mlp_in.push(std::mem::replace(&mut h, cache.out.clone()));
                mlp.push(cache);
            }
            deep = h;
        }

        let logits = (0..b).map(|r| linear[r] + fm[r] + deep[r]).collect();
        Ok(Tape {
            mode,
            batch: b,
            indices,
            emb,
            comb,
            bn,
            mask,
            mlp_in,
            mlp,
            linear,
            fm,
            deep,
            logits,
        })
    }

    /// Accumulates `Σ_r dlogits[r] · ∂logit_r/∂θ` into `grads`.
    pub fn backward(&self, tape: &Tape, dlogits: &[f64], grads: &mut GradBuffers) -> Result<()> {
        let b = tape.batch;
        if dlogits.len() != b {
            return Err(Error::Shape {
                expected: vec![b],
                actual: vec![dlogits.len()],
            });
        }
        let names = self.param_names();
        if grads.names != names {
            return Err(Error::invalid("gradient buffers do not match this model"));
        }
        for (i, t) in self.params().iter().enumerate() {
            grads.check_shape(i, t.shape())?;
        }
        let slots = self.slots();
        let bufs = &mut grads.buffers;
        let (m, k) = (self.config.n_fields, self.config.embed_dim);
        let v = self.variant();

        if let Some(i) = slots.lin {
            let (gb, gw) = pair_mut(bufs, i, i + 1);
            gb.data_mut()[0] += dlogits.iter().sum::<f64>();
            for (r, ix) in tape.indices.chunks(m).enumerate() {
                for &f in ix {
                    gw.row_mut(f)[0] += dlogits[r];
                }
            }
        }

        let Some(ei) = slots.emb else {
            return Ok(());
        };
        let mut grad_emb = vec![0.0; b * m * k];

        if v.has_fm_term() {
            for r in 0..b {
                let e = &tape.emb[r * m * k..(r + 1) * m * k];
                let g = &mut grad_emb[r * m * k..(r + 1) * m * k];
                for c in 0..k {
                    let s: f64 = (0..m).map(|f| e[f * k + c]).sum();
                    for f in 0..m {
                        g[f * k + c] += dlogits[r] * (s - e[f * k + c]);
                    }
                }
            }
        }

        if v.is_deep() {
            let mut grad = dlogits.to_vec();
            for (li, layer) in self.mlp.iter().enumerate().rev() {
                let at = slots.mlp + 2 * li;
                let (gw, gb) = pair_mut(bufs, at, at + 1);
                grad = layer.backward_batch(&tape.mlp_in[li], &tape.mlp[li], &grad, gw, gb);
            }
            if self.dropout.is_some() {
                grad = DropoutLayer::backward(&grad, tape.mask.as_deref());
            }
            if let (Some(layer), Some(cache), Some(bi)) = (&self.batchnorm, &tape.bn, slots.bn) {
                let (gg, gb) = pair_mut(bufs, bi, bi + 1);
                grad = layer.backward(cache, &grad, gg, gb);
            }
            let d = self.config.combination_dim();
            for r in 0..b {
                let gc = &grad[r * d..(r + 1) * d];
                let e = &tape.emb[r * m * k..(r + 1) * m * k];
                let ge = &mut grad_emb[r * m * k..(r + 1) * m * k];
                match v {
                    Variant::Fnn | Variant::WideDeep | Variant::DeepFm => {
                        ge.iter_mut().zip(gc).for_each(|(a, g)| *a += g);
                    }
                    Variant::Pnn => {
                        ge.iter_mut().zip(&gc[..m * k]).for_each(|(a, g)| *a += g);
                        inner_product_backward_raw(e, m, k, &gc[m * k..], ge);
                    }
                    Variant::Finn => {
                        let ii = slots.inter.expect("FINN has a relation tensor");
                        self.interaction.as_ref().expect("FINN has a relation tensor").backward_raw(
                            e,
                            m,
                            gc,
                            ge,
                            bufs[ii].data_mut(),
                        );
                    }
                    Variant::Lr | Variant::Fm => unreachable!(),
                }
            }
        }

        let table = self.embeddings.as_ref().expect("embedding slot implies table");
        table.backward(&tape.indices, &grad_emb, &mut bufs[ei]);
        Ok(())
    }

    /// Folds the batch statistics of a train-mode tape into BN's running
    /// estimates. No-op without BN or for eval tapes.
    pub fn update_running_stats(&mut self, tape: &Tape) {
        if let (Some(layer), Some(cache)) = (&mut self.batchnorm, &tape.bn) {
            layer.update_running(cache);
        }
    }

    /// Eval-mode prediction of one sample.
    pub fn predict(&self, sample: &EncodedSample) -> Result<Prediction> {
        let tape = self.forward(&[sample], Mode::Eval, &mut Rng::new(0))?;
        Ok(Prediction::from_logit(tape.logits[0]))
    }

    /// Eval-mode predictions, evaluated in chunks of `chunk` samples.
    pub fn predict_batch(&self, samples: &[EncodedSample], chunk: usize) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(samples.len());
        let mut rng = Rng::new(0);
        for part in samples.chunks(chunk.max(1)) {
            let refs: Vec<&EncodedSample> = part.iter().collect();
            let tape = self.forward(&refs, Mode::Eval, &mut rng)?;
            out.extend(tape.logits.iter().map(|&z| Prediction::from_logit(z)));
        }
        Ok(out)
    }

    fn predict_as(&self, expected: Variant, sample: &EncodedSample) -> Result<Prediction> {
        if self.variant() != expected {
            return Err(Error::WrongVariant {
                expected: expected.name(),
                actual: self.variant().name(),
            });
        }
        self.predict(sample)
    }

    pub fn predict_lr(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::Lr, sample)
    }

    pub fn predict_fm(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::Fm, sample)
    }

    pub fn predict_fnn(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::Fnn, sample)
    }

    pub fn predict_pnn(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::Pnn, sample)
    }

    pub fn predict_widedeep(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::WideDeep, sample)
    }

    pub fn predict_deepfm(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::DeepFm, sample)
    }

    pub fn predict_finn(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.predict_as(Variant::Finn, sample)
    }

    /// Runs a forward pass on one sample and keeps its tape for
    /// [`backprop`](Self::backprop).
    pub fn forward_recorded(&mut self, sample: &EncodedSample, mode: Mode, rng: &mut Rng) -> Result<Prediction> {
        let tape = self.forward(&[sample], mode, rng)?;
        let p = Prediction::from_logit(tape.logits[0]);
        self.recorded = Some((sample.clone(), tape));
        Ok(p)
    }

    /// Gradients of a per-sample loss whose derivative w.r.t. the logit is
    /// `loss_grad`. Requires a recorded forward pass on the same sample.
    pub fn backprop(&self, sample: &EncodedSample, loss_grad: f64) -> Result<GradBuffers> {
        let tape = match &self.recorded {
            Some((s, tape)) if s == sample => tape,
            _ => return Err(Error::NoForward),
        };
        let mut grads = self.new_grads();
        self.backward(tape, &[loss_grad], &mut grads)?;
        Ok(grads)
    }
}

fn pair_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    debug_assert!(a < b);
    let (lo, hi) = items.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::pair_count;
    use crate::layers::testutil::max_rel_err;
    use crate::layers::Mode;

    fn sample(ix: &[usize], y: u8) -> EncodedSample {
        EncodedSample::new(ix.to_vec(), y)
    }

    fn small(variant: Variant, seed: u64) -> ModelGraph {
        ModelGraph::new(
            ModelConfig::new(variant, 12, 4)
                .with_dims(3, 2, vec![8, 4])
                .with_seed(seed),
        )
        .unwrap()
    }

    #[test]
    fn zero_lr_predicts_half() {
        let g = small(Variant::Lr, 0);
        assert_eq!(g.predict_lr(&sample(&[0, 3, 6, 9], 1)).unwrap().probability, 0.5);
    }

    #[test]
    fn lr_bias_one() {
        let mut g = small(Variant::Lr, 0);
        g.linear_mut().unwrap().bias.data_mut()[0] = 1.0;
        let p = g.predict_lr(&sample(&[0, 3, 6, 9], 1)).unwrap();
        assert!((p.probability - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn lr_matches_dense_one_hot_dot() {
        let mut g = small(Variant::Lr, 0);
        let mut rng = Rng::new(5);
        for t in g.params_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = rng.uniform_range(-1.0, 1.0));
        }
        let s = sample(&[1, 4, 7, 11], 0);
        let mut x = vec![0.0; 12];
        s.indices.iter().for_each(|&i| x[i] = 1.0);
        let lin = g.linear().unwrap();
        let want = lin.bias.data()[0] + crate::math::dot(lin.weights.data(), &x);
        assert_eq!(g.predict(&s).unwrap().logit, want);
    }

    #[test]
    fn fm_single_pair() {
        let mut g = ModelGraph::new(ModelConfig::new(Variant::Fm, 2, 2).with_dims(2, 1, vec![])).unwrap();
        g.embeddings_mut()
            .unwrap()
            .weights_mut()
            .data_mut()
            .copy_from_slice(&[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.predict_fm(&sample(&[0, 1], 1)).unwrap().logit, 1.0);
    }

    #[test]
    fn wrong_variant_is_error() {
        let g = small(Variant::Fm, 0);
        assert!(matches!(
            g.predict_finn(&sample(&[0, 3, 6, 9], 1)),
            Err(Error::WrongVariant { expected: "finn", actual: "fm" })
        ));
    }

    #[test]
    fn backprop_requires_forward() {
        let mut g = small(Variant::Finn, 1);
        let s = sample(&[0, 3, 6, 9], 1);
        assert!(matches!(g.backprop(&s, 1.0), Err(Error::NoForward)));
        g.forward_recorded(&s, Mode::Eval, &mut Rng::new(0)).unwrap();
        assert!(g.backprop(&s, 1.0).is_ok());
        assert!(matches!(g.backprop(&sample(&[1, 3, 6, 9], 1), 1.0), Err(Error::NoForward)));
    }

    #[test]
    fn zero_loss_grad_gives_zero_grads() {
        for v in Variant::ALL {
            let mut g = small(v, 2);
            let s = sample(&[0, 3, 6, 9], 1);
            g.forward_recorded(&s, Mode::Eval, &mut Rng::new(0)).unwrap();
            assert_eq!(g.backprop(&s, 0.0).unwrap().max_abs(), 0.0, "{v}");
        }
    }

    #[test]
    fn lr_weight_grad_is_residual() {
        let mut g = small(Variant::Lr, 0);
        let s = sample(&[2, 5, 6, 10], 1);
        let p = g.forward_recorded(&s, Mode::Eval, &mut Rng::new(0)).unwrap();
        let grads = g.backprop(&s, p.probability - 1.0).unwrap();
        let w = grads.get("linear.weight").unwrap();
        for i in 0..12 {
            let want = if s.indices.contains(&i) { p.probability - 1.0 } else { 0.0 };
            assert_eq!(w.data()[i], want);
        }
    }

    #[test]
    fn rejects_bad_samples() {
        let g = small(Variant::Fnn, 0);
        assert!(matches!(g.predict(&sample(&[0, 1, 2], 1)), Err(Error::SchemaMismatch(_))));
        assert!(matches!(
            g.predict(&sample(&[0, 1, 2, 12], 1)),
            Err(Error::IndexOutOfRange { index: 12, n: 12 })
        ));
    }

    #[test]
    fn batch_forward_equals_single_forward() {
        for v in Variant::ALL {
            let g = small(v, 3);
            let a = sample(&[0, 3, 6, 9], 1);
            let b = sample(&[1, 4, 7, 10], 0);
            let tape = g.forward(&[&a, &b], Mode::Eval, &mut Rng::new(0)).unwrap();
            assert_eq!(tape.logits()[0], g.predict(&a).unwrap().logit);
            assert_eq!(tape.logits()[1], g.predict(&b).unwrap().logit);
        }
    }

    /// Finite differences of the summed logit over a two-sample batch, every
    /// variant, with BN and dropout active (fixed mask via a fixed seed).
    #[test]
    fn batched_backward_matches_finite_differences() {
        for v in Variant::ALL {
            let mut cfg = ModelConfig::new(v, 12, 4).with_dims(3, 2, vec![5]).with_seed(9);
            cfg.activation = Activation::Tanh;
            cfg.use_bn = true;
            cfg.keep_prob = Some(0.7);
            cfg.embed_init = 0.5;
            let mut g = ModelGraph::new(cfg).unwrap();
            let mut rng = Rng::new(1);
            if let Some(lin) = g.linear_mut() {
                lin.weights.data_mut().iter_mut().for_each(|x| *x = rng.uniform_range(-1.0, 1.0));
            }
            let a = sample(&[0, 3, 6, 9], 1);
            let b = sample(&[0, 4, 7, 10], 0);
            let c = sample(&[2, 4, 8, 11], 0);
            let batch = [&a, &b, &c];
            let tape = g.forward(&batch, Mode::Train, &mut Rng::new(42)).unwrap();
            let mut grads = g.new_grads();
            g.backward(&tape, &[1.0, -0.5, 0.25], &mut grads).unwrap();
            let names = g.param_names();
            for (pi, name) in names.iter().enumerate() {
                let len = g.params()[pi].len();
                let mut numeric = vec![0.0; len];
                for j in 0..len {
                    let orig = g.params()[pi].data()[j];
                    let mut eval = |x: f64| {
                        g.params_mut()[pi].data_mut()[j] = x;
                        let t = g.forward(&batch, Mode::Train, &mut Rng::new(42)).unwrap();
                        t.logits()[0] - 0.5 * t.logits()[1] + 0.25 * t.logits()[2]
                    };
                    let h = 1e-5;
                    numeric[j] = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
                    g.params_mut()[pi].data_mut()[j] = orig;
                }
                let err = max_rel_err(grads.buffers[pi].data(), &numeric);
                assert!(err < 1e-6, "{v} {name}: {err}");
            }
        }
    }

    #[test]
    fn set_mlp_checks_shapes() {
        let mut g = small(Variant::Finn, 0);
        let p = pair_count(4) * 2;
        let bad = DenseLayer::new(Tensor::filled(&[1, p + 1], 1.0), Tensor::zeros(&[1]), Activation::Identity).unwrap();
        assert!(g.set_mlp(vec![bad]).is_err());
        let good = DenseLayer::new(Tensor::filled(&[1, p], 1.0), Tensor::zeros(&[1]), Activation::Identity).unwrap();
        g.set_mlp(vec![good]).unwrap();
        assert!(g.config().hidden_sizes.is_empty());
    }
}
