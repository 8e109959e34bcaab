use super::loss::logloss_from_logit;
use crate::data::EncodedSample;
use crate::error::{Error, Result};
use crate::layers::{Activation, Mode};
use crate::math::{sigmoid, Rng};
use crate::models::{ModelConfig, ModelGraph, Variant};

/// Per-sample loss as a function of the logit.
pub trait Objective {
    fn value(&self, logit: f64, label: u8) -> f64;
    fn grad(&self, logit: f64, label: u8) -> f64;
}

/// Log loss through the sigmoid.
pub struct LogLoss;

impl Objective for LogLoss {
    fn value(&self, logit: f64, label: u8) -> f64 {
        logloss_from_logit(logit, label)
    }

    fn grad(&self, logit: f64, label: u8) -> f64 {
        sigmoid(logit) - f64::from(label)
    }
}

impl<F: Fn(f64, u8) -> (f64, f64)> Objective for F {
    fn value(&self, logit: f64, label: u8) -> f64 {
        self(logit, label).0
    }

    fn grad(&self, logit: f64, label: u8) -> f64 {
        self(logit, label).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub worst_rel_error: f64,
    /// `name[flat index]` of the worst scalar.
    pub worst_path: String,
    /// Worst error within each parameter group, in parameter order.
    pub groups: Vec<(String, f64)>,
    pub checked: usize,
}

impl GradcheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst_rel_error < tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1e-4)`; the floor keeps exact zeros from
/// producing spurious huge ratios.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

const DROPOUT_SEED: u64 = 0x5eed;

fn batch_loss(model: &ModelGraph, batch: &[&EncodedSample], mode: Mode, obj: &dyn Objective) -> Result<f64> {
    let tape = model.forward(batch, mode, &mut Rng::new(DROPOUT_SEED))?;
    let total: f64 = tape
        .logits()
        .iter()
        .zip(batch)
        .map(|(&z, s)| obj.value(z, s.label))
        .sum();
    Ok(total / batch.len() as f64)
}

/// Log-loss gradient check. See [`gradcheck_with`].
pub fn gradcheck(model: &mut ModelGraph, samples: &[EncodedSample], step: f64, mode: Mode) -> Result<GradcheckReport> {
    gradcheck_with(model, samples, step, mode, &LogLoss)
}

/// Compares backprop against `(L(θ+h) − L(θ−h)) / 2h` for every scalar
/// parameter, where `L` is the batch-mean objective over `samples`. In
/// train mode every evaluation reuses one dropout seed, so the mask is fixed.
pub fn gradcheck_with(
    model: &mut ModelGraph,
    samples: &[EncodedSample],
    step: f64,
    mode: Mode,
    obj: &dyn Objective,
) -> Result<GradcheckReport> {
    if !(step > 0.0) {
        return Err(Error::invalid("gradcheck step must be positive"));
    }
    if samples.is_empty() {
        return Err(Error::Empty("gradcheck samples"));
    }
    let batch: Vec<&EncodedSample> = samples.iter().collect();
    let tape = model.forward(&batch, mode, &mut Rng::new(DROPOUT_SEED))?;
    let b = batch.len() as f64;
    let dlogits: Vec<f64> = tape
        .logits()
        .iter()
        .zip(&batch)
        .map(|(&z, s)| obj.grad(z, s.label) / b)
        .collect();
    let mut grads = model.new_grads();
    model.backward(&tape, &dlogits, &mut grads)?;

    let names = model.param_names();
    let mut report = GradcheckReport {
        worst_rel_error: 0.0,
        worst_path: String::new(),
        groups: Vec::with_capacity(names.len()),
        checked: 0,
    };
    for (pi, name) in names.iter().enumerate() {
        let len = model.params()[pi].len();
        let mut group_worst = 0.0f64;
        for j in 0..len {
            let orig = model.params()[pi].data()[j];
            model.params_mut()[pi].data_mut()[j] = orig + step;
            let up = batch_loss(model, &batch, mode, obj)?;
            model.params_mut()[pi].data_mut()[j] = orig - step;
            let down = batch_loss(model, &batch, mode, obj)?;
            model.params_mut()[pi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = rel_err(grads.buffers[pi].data()[j], numeric);
            group_worst = group_worst.max(err);
            if err > report.worst_rel_error || report.worst_path.is_empty() {
                report.worst_rel_error = err;
                report.worst_path = format!("{name}[{j}]");
            }
            report.checked += 1;
        }
        report.groups.push((name.clone(), group_worst));
    }
    Ok(report)
}

/// Overwrites every parameter with a uniform draw in `[-scale, scale)`.
pub fn randomize_params(model: &mut ModelGraph, rng: &mut Rng, scale: f64) {
    for t in model.params_mut() {
        t.data_mut().iter_mut().for_each(|x| *x = rng.uniform_range(-scale, scale));
    }
}

/// Shifts hidden-layer biases until no ReLU pre-activation on `samples`
/// lies within `margin` of zero, so finite differences never straddle a
/// kink. Processes layers bottom-up because earlier shifts move later
/// inputs.
pub fn nudge_off_kinks(model: &mut ModelGraph, samples: &[EncodedSample], mode: Mode, margin: f64) -> Result<()> {
    let batch: Vec<&EncodedSample> = samples.iter().collect();
    let n_layers = model.mlp().len();
    for li in 0..n_layers {
        if model.mlp()[li].activation() != Activation::Relu {
            continue;
        }
        for _ in 0..64 {
            let tape = model.forward(&batch, mode, &mut Rng::new(DROPOUT_SEED))?;
            let pre = tape.preactivations(li).expect("layer index in range");
            let width = model.mlp()[li].d_out();
            let mut moved = false;
            for u in 0..width {
                let near = pre.iter().skip(u).step_by(width).any(|z| z.abs() < margin);
                if near {
                    model.mlp_mut()[li].bias_mut().data_mut()[u] += 3.0 * margin;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
    Ok(())
}

/// A small random model and batch for gradient checking: 4 fields of 5
/// categories, `k = 3`, `l = 2`, hidden `[8, 4]`, ReLU, every parameter
/// uniform in `[-0.5, 0.5)`, four samples with ReLU inputs kept `1e-3`
/// away from the kink.
pub fn gradcheck_instance(variant: Variant, seed: u64) -> Result<(ModelGraph, Vec<EncodedSample>)> {
    let (m, per_field) = (4, 5);
    let cfg = ModelConfig::new(variant, m * per_field, m)
        .with_dims(3, 2, vec![8, 4])
        .with_seed(seed);
    let mut model = ModelGraph::new(cfg)?;
    let mut rng = Rng::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    randomize_params(&mut model, &mut rng, 0.5);
    let samples: Vec<EncodedSample> = (0..4)
        .map(|_| {
            let ix = (0..m).map(|f| f * per_field + rng.below(per_field)).collect();
            EncodedSample::new(ix, u8::from(rng.bernoulli(0.5)))
        })
        .collect();
    nudge_off_kinks(&mut model, &samples, Mode::Eval, 1e-3)?;
    Ok((model, samples))
}
