use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use finn_core::checkpoint;
use finn_core::data::{
    downsample_negatives, read_encoded, read_raw, split, write_encoded, write_raw, EncodedSample, FeatureMap,
    FeatureSchema,
};
use finn_core::layers::Mode;
use finn_core::metrics::{auc, mean_logloss};
use finn_core::synth;
use finn_core::training::{self, gradcheck_instance, AdamState};
use finn_core::{ModelGraph, Rng};
use log::{info, warn};
use rayon::prelude::*;

use crate::args::{
    DatasetKind, EvalArgs, GenerateArgs, GradcheckArgs, ModelArgs, OptimArgs, PredictArgs, PreprocessArgs, SweepArgs,
    TrainArgs,
};
use crate::CliError;

type CmdResult = Result<(), CliError>;

const PREDICT_CHUNK: usize = 1024;

fn parse_delimiter(s: &str) -> Result<char, CliError> {
    match s {
        "tab" | "\\t" => Ok('\t'),
        "comma" => Ok(','),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(CliError::Usage(format!("delimiter must be a single character, got `{s}`"))),
            }
        }
    }
}

fn artifacts_dir(explicit: Option<&PathBuf>, data: &Path) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => match data.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        },
    }
}

/// Identifies the feature space a model was trained on: the schema
/// fingerprint plus the total feature count.
fn schema_hash(map: &FeatureMap) -> String {
    format!("{}:{}", map.schema().fingerprint_hex(), map.n_features())
}

pub fn preprocess(a: &PreprocessArgs) -> CmdResult {
    let delimiter = parse_delimiter(&a.delimiter)?;
    let schema = FeatureSchema::load(&a.schema)?;
    let records = read_raw(File::open(&a.input)?, &schema, delimiter, &a.input)?;
    info!("read {} records from {}", records.len(), a.input.display());

    let mut rng = Rng::new(a.seed);
    let records = match a.target_pos_ratio {
        Some(r) => {
            let kept = downsample_negatives(&records, r, &mut rng)?;
            info!("downsampled to {} records", kept.len());
            kept
        }
        None => records,
    };
    let (train, test) = match a.split {
        Some(f) => {
            let (tr, te) = split(&records, f, &mut rng, a.split_mode.into())?;
            (tr, Some(te))
        }
        None => (records, None),
    };

    let map = FeatureMap::fit(&train, schema, a.min_count, a.n_buckets)?;
    if map.vocabulary().all_oov() {
        warn!(
            "every categorical field collapsed to its OOV slot (min-count {} too high for this corpus)",
            a.min_count
        );
        eprintln!("warning: every categorical field collapsed to OOV");
    }
    map.save(&a.out)?;
    match test {
        Some(test) => {
            write_encoded(&a.out.join("train.tsv"), &map.encode_all(&train)?)?;
            write_encoded(&a.out.join("test.tsv"), &map.encode_all(&test)?)?;
            println!("train={} test={} features={}", train.len(), test.len(), map.n_features());
        }
        None => {
            write_encoded(&a.out.join("data.tsv"), &map.encode_all(&train)?)?;
            println!("samples={} features={}", train.len(), map.n_features());
        }
    }
    Ok(())
}

fn build_model(model: &ModelArgs, seed: u64, map: &FeatureMap) -> Result<ModelGraph, CliError> {
    let cfg = model.to_config(map.n_features(), map.schema().len(), seed);
    Ok(ModelGraph::new(cfg)?)
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let dir = artifacts_dir(a.artifacts.as_ref(), &a.data);
    let map = FeatureMap::load(&dir)?;
    let data = read_encoded(&a.data)?;
    let eval = a.eval.as_ref().map(|p| read_encoded(p)).transpose()?;

    let mut model = build_model(&a.model, a.optim.seed, &map)?;
    info!(
        "{} with {} parameters on {} samples",
        model.variant(),
        model.param_count(),
        data.len()
    );
    let cfg = a.optim.to_config();
    let mut state = AdamState::new(cfg.adam);
    let report = training::train_with_state(&mut model, &mut state, &data, eval.as_deref(), &cfg)?;

    let optimizer = a.save_optimizer.then_some(&state);
    checkpoint::save(&a.out, &model, &schema_hash(&map), optimizer)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.tsv");
        PathBuf::from(p)
    });
    fs::write(&report_path, report.to_text())?;

    if let Some(last) = report.last() {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        println!(
            "epochs={} train_logloss={:.6} eval_auc={} eval_logloss={}",
            last.epoch,
            last.train_logloss,
            fmt(last.eval_auc),
            fmt(last.eval_logloss)
        );
    }
    Ok(())
}

fn load_scored(checkpoint_path: &Path, data: &Path, artifacts: Option<&PathBuf>) -> Result<(Vec<f64>, Vec<u8>), CliError> {
    let map = FeatureMap::load(&artifacts_dir(artifacts, data))?;
    let ck = checkpoint::load_for_schema(checkpoint_path, &schema_hash(&map))?;
    let samples = read_encoded(data)?;
    let probs = ck
        .model
        .predict_batch(&samples, PREDICT_CHUNK)?
        .iter()
        .map(|p| p.probability)
        .collect();
    let labels = samples.iter().map(|s| s.label).collect();
    Ok((probs, labels))
}

pub fn evaluate(a: &EvalArgs) -> CmdResult {
    let (probs, labels) = load_scored(&a.checkpoint, &a.data, a.artifacts.as_ref())?;
    let area = auc(&probs, &labels)?;
    let loss = mean_logloss(&probs, &labels)?;
    println!("auc={area:.6} logloss={loss:.6}");
    Ok(())
}

pub fn predict(a: &PredictArgs) -> CmdResult {
    let (probs, _) = load_scored(&a.checkpoint, &a.data, a.artifacts.as_ref())?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    for p in &probs {
        writeln!(w, "{p:.6}")?;
    }
    w.flush()?;
    info!("wrote {} predictions to {}", probs.len(), a.out.display());
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> CmdResult {
    if a.configs == 0 {
        return Err(CliError::Usage("--configs must be >= 1".into()));
    }
    // worst error per group over all instances, in parameter order
    let mut groups: Vec<(String, f64)> = Vec::new();
    let mut worst = (f64::NEG_INFINITY, String::new(), 0u64);
    let mut checked = 0;
    for seed in a.seed..a.seed + a.configs {
        let (mut model, samples) = gradcheck_instance(a.model, seed)?;
        let r = training::gradcheck(&mut model, &samples, a.step, Mode::Eval)?;
        checked += r.checked;
        for (name, err) in r.groups {
            match groups.iter_mut().find(|(n, _)| *n == name) {
                Some(g) => g.1 = g.1.max(err),
                None => groups.push((name, err)),
            }
        }
        if r.worst_rel_error > worst.0 {
            worst = (r.worst_rel_error, r.worst_path, seed);
        }
    }
    for (name, err) in &groups {
        let verdict = if *err < a.tolerance { "PASS" } else { "FAIL" };
        println!("{name}\t{err:.3e}\t{verdict}");
    }
    let ok = worst.0 < a.tolerance;
    println!(
        "{}: {} configs, {checked} scalars, worst {:.3e} at {} (seed {}), tolerance {:e}: {}",
        a.model,
        a.configs,
        worst.0,
        worst.1,
        worst.2,
        a.tolerance,
        if ok { "PASS" } else { "FAIL" }
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "gradcheck failed: worst relative error {:.3e} at {}",
            worst.0, worst.1
        )))
    }
}

/// Hyperparameters `sweep --key` understands.
pub const SWEEP_KEYS: [&str; 12] = [
    "embed-dim",
    "interaction-dim",
    "layers",
    "neurons",
    "keep-prob",
    "bn",
    "regularizer",
    "activation",
    "model",
    "alpha",
    "batch-size",
    "epochs",
];

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> String {
    format!("bad value `{value}` for {key}: {why}")
}

/// Sets one hyperparameter on copies of the base arguments.
fn apply(key: &str, value: &str, model: &mut ModelArgs, optim: &mut OptimArgs) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e| bad(key, value, e))
    }
    match key {
        "embed-dim" => model.embed_dim = num(key, value)?,
        "interaction-dim" => model.interaction_dim = num(key, value)?,
        "layers" => {
            model.layers = num(key, value)?;
            model.hidden = None;
        }
        "neurons" => {
            model.neurons = num(key, value)?;
            model.hidden = None;
        }
        "keep-prob" => {
            model.keep_prob = match value {
                "none" => None,
                v => Some(num(key, v)?),
            }
        }
        "bn" => model.bn = num(key, value)?,
        "regularizer" => match value {
            "none" => {
                model.keep_prob = None;
                model.bn = false;
            }
            "dropout" => {
                model.keep_prob = Some(model.keep_prob.unwrap_or(0.5));
                model.bn = false;
            }
            "bn" => {
                model.keep_prob = None;
                model.bn = true;
            }
            other => return Err(bad(key, other, "expected none, dropout or bn")),
        },
        "activation" => model.activation = value.parse().map_err(|e| bad(key, value, e))?,
        "model" => model.model = value.parse().map_err(|e| bad(key, value, e))?,
        "alpha" => optim.alpha = num(key, value)?,
        "batch-size" => optim.batch_size = num(key, value)?,
        "epochs" => optim.epochs = num(key, value)?,
        other => {
            return Err(format!(
                "unknown sweep key `{other}` (expected one of: {})",
                SWEEP_KEYS.join(", ")
            ))
        }
    }
    Ok(())
}

struct Trial {
    value: String,
    model: ModelArgs,
    optim: OptimArgs,
}

fn run_trial(t: &Trial, map: &FeatureMap, data: &[EncodedSample], eval: &[EncodedSample]) -> Result<(f64, f64), CliError> {
    let mut model = build_model(&t.model, t.optim.seed, map)?;
    training::train(&mut model, data, None, &t.optim.to_config())?;
    let probs: Vec<f64> = model
        .predict_batch(eval, PREDICT_CHUNK)?
        .iter()
        .map(|p| p.probability)
        .collect();
    let labels: Vec<u8> = eval.iter().map(|s| s.label).collect();
    info!("trial {} done", t.value);
    Ok((auc(&probs, &labels)?, mean_logloss(&probs, &labels)?))
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    // settle every value before any training starts
    let trials = a
        .values
        .iter()
        .map(|v| {
            let (mut model, mut optim) = (a.model.clone(), a.optim.clone());
            apply(&a.key, v.trim(), &mut model, &mut optim).map(|()| Trial {
                value: v.trim().to_string(),
                model,
                optim,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Usage)?;

    let map = FeatureMap::load(&artifacts_dir(a.artifacts.as_ref(), &a.data))?;
    let data = read_encoded(&a.data)?;
    let eval = read_encoded(&a.eval)?;
    for t in &trials {
        t.model
            .to_config(map.n_features(), map.schema().len(), t.optim.seed)
            .validate()?;
        t.optim.to_config().validate()?;
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(f64, f64), CliError>> =
        pool.install(|| trials.par_iter().map(|t| run_trial(t, &map, &data, &eval)).collect());

    let mut table = format!("{}\tauc\tlogloss\n", a.key);
    for (t, r) in trials.iter().zip(results) {
        let (area, loss) = r?;
        table.push_str(&format!("{}\t{area:.6}\t{loss:.6}\n", t.value));
    }
    print!("{table}");
    if let Some(out) = &a.out {
        fs::write(out, &table)?;
    }
    Ok(())
}

pub fn generate(a: &GenerateArgs) -> CmdResult {
    let d = match a.kind {
        DatasetKind::Xor => synth::xor_parity(a.rows, a.categories, a.noise, a.seed)?,
        DatasetKind::Separable => synth::separable(a.rows, a.seed)?,
        DatasetKind::Ctr => synth::ctr_surrogate(a.rows, a.seed)?,
    };
    let w = BufWriter::new(File::create(&a.out)?);
    write_raw(w, &d.schema, &d.records, '\t')?;
    fs::write(&a.schema_out, d.schema.to_text())?;
    println!("rows={} positive_rate={:.4}", d.records.len(), d.positive_rate());
    Ok(())
}
