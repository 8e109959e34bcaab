use std::fmt::Write as _;

use log::{debug, info};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{logloss, logloss_grad};
use crate::data::{batch_iter, EncodedSample};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::math::Rng;
use crate::metrics::{auc, mean_logloss};
use crate::models::ModelGraph;

const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Stop after this many epochs without an eval-AUC improvement and
    /// restore the best parameters. Needs an eval set.
    pub patience: Option<usize>,
    /// Also evaluate every this many batches.
    pub eval_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 256,
            adam: AdamConfig::default(),
            seed: 0,
            patience: None,
            eval_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.patience == Some(0) || self.eval_every == Some(0) {
            return Err(Error::invalid("patience and eval_every must be >= 1 when set"));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the train-mode batch losses seen this epoch.
    pub train_logloss: f64,
    pub eval_auc: Option<f64>,
    pub eval_logloss: Option<f64>,
}

/// An evaluation taken mid-epoch (see [`TrainConfig::eval_every`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub epoch: usize,
    pub batch: usize,
    pub auc: Option<f64>,
    pub logloss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub intermediate: Vec<EvalRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl TrainReport {
    /// One `epoch\ttrain_logloss\teval_auc\teval_logloss` line per epoch;
    /// missing eval values are written as `NA`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.epochs {
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{}\t{}",
                r.epoch,
                r.train_logloss,
                opt(r.eval_auc),
                opt(r.eval_logloss)
            );
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

fn evaluate(model: &ModelGraph, data: &[EncodedSample]) -> Result<(Option<f64>, f64)> {
    let probs: Vec<f64> = model
        .predict_batch(data, EVAL_CHUNK)?
        .iter()
        .map(|p| p.probability)
        .collect();
    let labels: Vec<u8> = data.iter().map(|s| s.label).collect();
    let a = match auc(&probs, &labels) {
        Ok(a) => Some(a),
        Err(Error::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok((a, mean_logloss(&probs, &labels)?))
}

fn check_data(model: &ModelGraph, data: &[EncodedSample], what: &str) -> Result<()> {
    let cfg = model.config();
    for (i, s) in data.iter().enumerate() {
        s.validate(cfg.n_fields, cfg.n_features).map_err(|e| {
            Error::SchemaMismatch(format!("{what} sample {i} does not fit the model: {e}"))
        })?;
    }
    Ok(())
}

/// Trains with a fresh optimizer. See [`train_with_state`].
pub fn train(
    model: &mut ModelGraph,
    data: &[EncodedSample],
    eval: Option<&[EncodedSample]>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let mut state = AdamState::new(cfg.adam);
    train_with_state(model, &mut state, data, eval, cfg)
}

/// Mini-batch training: each epoch shuffles with the seeded stream, takes
/// the batch-mean gradient of the log loss and applies one Adam step per
/// batch. Stochastic layers run in train mode during updates and in eval
/// mode for metrics. Every sample is checked against the model before the
/// first update.
pub fn train_with_state(
    model: &mut ModelGraph,
    state: &mut AdamState,
    data: &[EncodedSample],
    eval: Option<&[EncodedSample]>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_data(model, data, "training")?;
    if let Some(ev) = eval {
        if ev.is_empty() {
            return Err(Error::Empty("eval set"));
        }
        check_data(model, ev, "eval")?;
    }
    if cfg.patience.is_some() && eval.is_none() {
        return Err(Error::invalid("early stopping needs an eval set"));
    }
    state.config = cfg.adam;

    let mut rng = Rng::new(cfg.seed);
    let mut drop_rng = rng.fork();
    let mut grads = model.new_grads();
    let uses_bn = model.batchnorm().is_some();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ModelGraph)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for (bi, batch) in batch_iter(data, cfg.batch_size, true, &mut rng)?.enumerate() {
            let b = batch.len();
            if uses_bn && b < 2 {
                debug!("skipping size-1 batch {bi} (batch statistics undefined)");
                continue;
            }
            let tape = model.forward(&batch.samples, Mode::Train, &mut drop_rng)?;
            let probs = tape.probabilities();
            let mut batch_loss = 0.0;
            let mut dlogits = Vec::with_capacity(b);
            for (p, s) in probs.iter().zip(&batch.samples) {
                batch_loss += logloss(*p, s.label);
                dlogits.push(logloss_grad(*p, s.label) / b as f64);
            }
            if !batch_loss.is_finite() || tape.logits().iter().any(|z| !z.is_finite()) {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            loss_sum += batch_loss;
            seen += b;
            grads.zero();
            model.backward(&tape, &dlogits, &mut grads)?;
            adam_step(model.params_mut(), &grads, state)?;
            model.update_running_stats(&tape);

            if let (Some(every), Some(ev)) = (cfg.eval_every, eval) {
                if (bi + 1) % every == 0 {
                    let (a, l) = evaluate(model, ev)?;
                    report.intermediate.push(EvalRecord {
                        epoch,
                        batch: bi + 1,
                        auc: a,
                        logloss: l,
                    });
                }
            }
        }
        let train_logloss = if seen > 0 { loss_sum / seen as f64 } else { f64::NAN };
        let (eval_auc, eval_logloss) = match eval {
            Some(ev) => {
                let (a, l) = evaluate(model, ev)?;
                (a, Some(l))
            }
            None => (None, None),
        };
        info!(
            "epoch {epoch}: train_logloss={train_logloss:.6} eval_auc={} eval_logloss={}",
            opt(eval_auc),
            opt(eval_logloss)
        );
        report.epochs.push(EpochRecord {
            epoch,
            train_logloss,
            eval_auc,
            eval_logloss,
        });

        if let Some(patience) = cfg.patience {
            let score = eval_auc.unwrap_or(f64::NEG_INFINITY);
            match &best {
                Some((b, _)) if score <= *b => since_best += 1,
                _ => {
                    best = Some((score, model.clone()));
                    report.best_epoch = Some(epoch);
                    since_best = 0;
                }
            }
            if since_best >= patience {
                report.stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    if let Some((_, snapshot)) = best {
        *model = snapshot;
    }
    Ok(report)
}
