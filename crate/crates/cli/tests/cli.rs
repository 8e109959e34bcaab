use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use finn_core::checkpoint;
use finn_core::{ModelConfig, ModelGraph, Variant};
use tempfile::TempDir;

fn finn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = finn(args);
    assert!(
        out.status.success(),
        "finn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    finn(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a 3-field toy log (two categorical, one numerical) and its schema.
fn toy(dir: &Path, rows: usize) -> (PathBuf, PathBuf) {
    let raw = dir.join("raw.tsv");
    let schema = dir.join("schema.txt");
    let mut text = String::from("site\tdevice\tprice\tlabel\n");
    for i in 0..rows {
        let label = u8::from(i % 3 == 0);
        text.push_str(&format!("s{}\td{}\t{}.5\t{label}\n", i % 3, i % 2, i % 7));
    }
    fs::write(&raw, text).unwrap();
    fs::write(&schema, "site categorical\ndevice categorical\nprice numerical\n").unwrap();
    (raw, schema)
}

/// Toy data preprocessed into `dir/enc`, returning the encoded file.
fn encoded_toy(dir: &TempDir) -> PathBuf {
    let (raw, schema) = toy(dir.path(), 60);
    let enc = dir.path().join("enc");
    ok(&["preprocess", "--input", p(&raw), "--schema", p(&schema), "--out", p(&enc)]);
    enc.join("data.tsv")
}

#[test]
fn preprocess_writes_one_index_per_field() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let text = fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 60);
    for line in text.lines() {
        let (label, idx) = line.split_once('\t').unwrap();
        assert!(label == "0" || label == "1");
        assert_eq!(idx.split(',').count(), 3);
    }
    for f in ["schema.txt", "vocab.tsv", "buckets.tsv"] {
        assert!(data.parent().unwrap().join(f).exists(), "{f}");
    }
}

#[test]
fn preprocess_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let (raw, schema) = toy(dir.path(), 80);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&[
            "preprocess", "--input", p(&raw), "--schema", p(&schema), "--split", "0.7", "--seed", "3", "--out", p(&out),
        ]);
        let files: Vec<Vec<u8>> = ["schema.txt", "vocab.tsv", "buckets.tsv", "train.tsv", "test.tsv"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn rare_categories_collapse_with_warning() {
    let dir = TempDir::new().unwrap();
    let (raw, schema) = toy(dir.path(), 30);
    let out = finn(&[
        "preprocess", "--input", p(&raw), "--schema", p(&schema), "--min-count", "20", "--out",
        p(&dir.path().join("enc")),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("OOV"));
}

#[test]
fn downsampling_single_class_fails() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw.tsv");
    let schema = dir.path().join("schema.txt");
    fs::write(&raw, "a\tb\tlabel\nx\ty\t0\nz\ty\t0\n").unwrap();
    fs::write(&schema, "a categorical\nb categorical\n").unwrap();
    let c = code(&[
        "preprocess", "--input", p(&raw), "--schema", p(&schema), "--target-pos-ratio", "0.5", "--out",
        p(&dir.path().join("e")),
    ]);
    assert_eq!(c, 2);
}

#[test]
fn zero_alpha_keeps_initial_parameters() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let ckpt = dir.path().join("lr.ckpt");
    ok(&["train", "--data", p(&data), "--model", "lr", "--epochs", "1", "--alpha", "0", "--out", p(&ckpt)]);
    let loaded = checkpoint::load(&ckpt).unwrap().model;
    let fresh = ModelGraph::new(loaded.config().clone()).unwrap();
    assert_eq!(loaded.params(), fresh.params());

    // the all-zero LR scores every sample 0.5
    let ev = ok(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    assert!(ev.trim().ends_with("logloss=0.693147"), "{ev}");
    let preds = dir.path().join("p.txt");
    ok(&["predict", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&preds)]);
    let lines = fs::read_to_string(&preds).unwrap();
    assert_eq!(lines.lines().count(), 60);
    assert!(lines.lines().all(|l| l == "0.500000"));
}

#[test]
fn large_scale_regime_flags_are_accepted() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let ckpt = dir.path().join("finn.ckpt");
    ok(&[
        "train", "--data", p(&data), "--model", "finn", "--embed-dim", "30", "--interaction-dim", "10", "--layers", "5",
        "--neurons", "700", "--epochs", "1", "--out", p(&ckpt),
    ]);
    let cfg = checkpoint::load(&ckpt).unwrap().model.config().clone();
    assert_eq!((cfg.embed_dim, cfg.interaction_dim), (30, 10));
    assert_eq!(cfg.hidden_sizes, vec![700; 5]);
}

#[test]
fn overfit_then_evaluate_and_rescore() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let ckpt = dir.path().join("fm.ckpt");
    ok(&[
        "train", "--data", p(&data), "--model", "fm", "--embed-dim", "4", "--epochs", "200", "--batch-size", "16",
        "--alpha", "0.05", "--out", p(&ckpt),
    ]);
    let first = ok(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    let second = ok(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    assert_eq!(first, second);
    assert!(first.starts_with("auc=1.000000 "), "{first}");

    // the printed probabilities reproduce the printed log loss
    let preds = dir.path().join("p.txt");
    ok(&["predict", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&preds)]);
    let probs: Vec<f64> = fs::read_to_string(&preds).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    let labels: Vec<u8> = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| l[..1].parse().unwrap())
        .collect();
    let rescored: f64 = probs
        .iter()
        .zip(&labels)
        .map(|(&q, &y)| finn_core::training::logloss(q, y))
        .sum::<f64>()
        / probs.len() as f64;
    let printed: f64 = first.split("logloss=").nth(1).unwrap().trim().parse().unwrap();
    // six printed decimals bound the error on each probability by 5e-7
    assert!((rescored - printed).abs() < 1e-3, "{rescored} vs {printed}");
}

#[test]
fn same_flags_same_checkpoint_bytes() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let ckpt = dir.path().join(format!("{run}.ckpt"));
        ok(&[
            "train", "--data", p(&data), "--model", "deepfm", "--embed-dim", "4", "--hidden", "8,4", "--keep-prob",
            "0.7", "--epochs", "3", "--batch-size", "8", "--seed", "9", "--out", p(&ckpt),
        ]);
        files.push((fs::read(&ckpt).unwrap(), fs::read(dir.path().join(format!("{run}.ckpt.report.tsv"))).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn foreign_schema_is_refused() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let ckpt = dir.path().join("lr.ckpt");
    ok(&["train", "--data", p(&data), "--model", "lr", "--epochs", "1", "--out", p(&ckpt)]);

    let other = dir.path().join("other");
    fs::create_dir(&other).unwrap();
    let raw = other.join("raw.tsv");
    let schema = other.join("schema.txt");
    fs::write(&raw, "a\tb\tlabel\nx\ty\t0\nz\ty\t1\n").unwrap();
    fs::write(&schema, "a categorical\nb categorical\n").unwrap();
    ok(&["preprocess", "--input", p(&raw), "--schema", p(&schema), "--out", p(&other)]);
    let out = finn(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&other.join("data.tsv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn single_class_evaluation_is_an_error() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let ckpt = dir.path().join("lr.ckpt");
    ok(&["train", "--data", p(&data), "--model", "lr", "--epochs", "1", "--out", p(&ckpt)]);
    let negatives: String = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with('0'))
        .map(|l| format!("{l}\n"))
        .collect();
    let neg = data.with_file_name("neg.tsv");
    fs::write(&neg, negatives).unwrap();
    assert_eq!(code(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&neg)]), 2);
}

#[test]
fn gradcheck_exit_codes() {
    assert_eq!(code(&["gradcheck", "--model", "lr", "--tolerance", "1e-7"]), 0);
    assert_eq!(code(&["gradcheck", "--model", "finn", "--tolerance", "1e-5", "--configs", "3"]), 0);
    let out = finn(&["gradcheck", "--model", "finn", "--tolerance", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL") && text.contains("worst"), "{text}");
}

#[test]
fn sweep_prints_one_row_per_value_in_order() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("xor.tsv");
    let schema = dir.path().join("xor.schema");
    ok(&["generate", "--kind", "xor", "--rows", "600", "--out", p(&raw), "--schema-out", p(&schema)]);
    let enc = dir.path().join("enc");
    ok(&["preprocess", "--input", p(&raw), "--schema", p(&schema), "--split", "0.75", "--out", p(&enc)]);
    let (train, test) = (enc.join("train.tsv"), enc.join("test.tsv"));
    let args = [
        "sweep", "--data", p(&train), "--eval", p(&test), "--key", "embed-dim",
        "--values", "10,20,30,40,50", "--model", "fm", "--epochs", "2", "--batch-size", "64",
    ];
    let table = ok(&args);
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "embed-dim\tauc\tlogloss");
    let firsts: Vec<&str> = rows[1..].iter().map(|r| r.split('\t').next().unwrap()).collect();
    assert_eq!(firsts, ["10", "20", "30", "40", "50"]);
    assert_eq!(ok(&args), table);
}

#[test]
fn sweep_rejects_unknown_key_before_training() {
    let out = finn(&["sweep", "--data", "/nonexistent", "--eval", "/nonexistent", "--key", "depth", "--values", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown sweep key"));
}

#[test]
fn config_file_then_flags() {
    let dir = TempDir::new().unwrap();
    let data = encoded_toy(&dir);
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# toy run\nmodel = fm\nembed-dim = 5\nepochs = 2\n").unwrap();
    let ckpt = dir.path().join("c.ckpt");
    ok(&[
        "train", "--config", p(&conf), "--data", p(&data), "--embed-dim", "3", "--out", p(&ckpt),
    ]);
    let cfg = checkpoint::load(&ckpt).unwrap().model.config().clone();
    assert_eq!(cfg.variant, Variant::Fm);
    assert_eq!(cfg.embed_dim, 3);
    let report = fs::read_to_string(dir.path().join("c.ckpt.report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 2);

    fs::write(&conf, "learning-rate = 0.1\n").unwrap();
    assert_eq!(code(&["train", "--config", p(&conf), "--data", p(&data), "--out", p(&ckpt)]), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&["train", "--bogus-flag"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["evaluate", "--checkpoint", "/nonexistent", "--data", "/nonexistent"]), 2);
}

#[test]
fn untrained_model_config_roundtrips_through_checkpoint() {
    let dir = TempDir::new().unwrap();
    let g = ModelGraph::new(ModelConfig::new(Variant::Pnn, 10, 3)).unwrap();
    let path = dir.path().join("g.ckpt");
    checkpoint::save(&path, &g, "h", None).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap().model.config(), g.config());
}
