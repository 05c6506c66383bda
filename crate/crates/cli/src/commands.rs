//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use facekit::audit::{
    confusion_report, cooccurrence, decisions_per_minute, fit_tree, mine_label_noise,
    workload_estimate, CooccurrenceMetric, WorkloadInputs,
};
use facekit::cnn::{self, save_checkpoint, TrainConfig};
use facekit::data::{
    load_images, make_split, parse_attribute_file, pnm::write_pgm, parse_embeddings,
    AttributeTable, BalanceMode, Split,
};
use facekit::eval::EvalOutcome;
use facekit::probe::{evaluate_probe, train_probe, LinearProbe, ProbeConfig};
use facekit::report::{
    read_eval_records, sha256_hex, write_confusion, write_cooccurrence, write_eval,
    write_history, write_noise, write_workload, ReportHeader,
};
use facekit::tensor::Tensor;

use crate::{
    AuditConfusionArgs, AuditCooccurArgs, AuditNoiseArgs, AuditTreeArgs, AuditWorkloadArgs,
    InspectArgs, TrainCnnArgs, TrainProbeArgs,
};
use crate::config::Resolver;

/// Output directory with rollback: files written during a failed run are
/// removed so a nonzero exit never leaves partial outputs behind.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn create(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(OutDir {
            dir,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Record a file some other writer produced at `path(name)`.
    fn record(&mut self, name: &str) {
        self.written.push(self.path(name));
    }

    pub fn remove_written(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Run `body` against a fresh output directory, deleting anything it
/// wrote if it fails.
fn with_outputs(dir: PathBuf, body: impl FnOnce(&mut OutDir) -> Result<()>) -> Result<()> {
    let mut out = OutDir::create(dir)?;
    match body(&mut out) {
        Ok(()) => Ok(()),
        Err(e) => {
            out.remove_written();
            Err(e)
        }
    }
}

fn check_file_exists(label: &str, path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{label} not found: {}", path.display());
    }
    Ok(())
}

fn read_attr_table(path: &Path) -> Result<(AttributeTable, String)> {
    check_file_exists("attribute file", path)?;
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let table = parse_attribute_file(&bytes[..])
        .with_context(|| format!("in attribute file {}", path.display()))?;
    Ok((table, sha256_hex(&bytes)))
}

fn class_labels(table: &AttributeTable, attr: usize, ids: &[String]) -> Result<Vec<u8>> {
    ids.iter()
        .map(|id| Ok(u8::from(table.label(id, attr)? == 1)))
        .collect::<facekit::Result<_>>()
        .map_err(Into::into)
}

/// Content digest over resized image tensors, in load order.
fn digest_tensors(sets: &[&[Tensor<f32>]]) -> String {
    let mut bytes = Vec::new();
    for set in sets {
        for t in *set {
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    sha256_hex(&bytes)
}

fn print_accuracy(outcome: &EvalOutcome) {
    let correct = outcome.counts.true_positive + outcome.counts.true_negative;
    println!(
        "final test accuracy: {:.2}% ({}/{} correct)",
        outcome.accuracy * 100.0,
        correct,
        outcome.counts.total()
    );
}

pub fn train_cnn(args: TrainCnnArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let attr_file = r.require_path("attr-file", args.attr_file)?;
    let image_root = r.require_path("image-root", args.image_root)?;
    let attr = r.require::<String>("attr", args.attr)?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let train_n = r.get("train-n", args.train_n, 5000usize)?;
    let test_n = r.get("test-n", args.test_n, 5000usize)?;
    let img_size = r.get("img-size", args.img_size, crate::config::ImgSize(32, 32))?;
    let balance = r.get(
        "balance",
        args.balance,
        crate::config::Balance(BalanceMode::TrainOnly),
    )?;
    let config = TrainConfig {
        learning_rate: r.get("lr", args.lr, 0.01)?,
        momentum: r.get("momentum", args.momentum, 0.9)?,
        batch_size: r.get("batch-size", args.batch_size, 64usize)?,
        epochs: r.get("epochs", args.epochs, 15usize)?,
        dropout_rate: r.get("dropout", args.dropout, 0.5)?,
        eval_every: r.get("eval-every", args.eval_every, 1usize)?,
        seed,
    };
    let dry_run = r.get_switch("dry-run", args.dry_run)?;
    let echoed = r.finish()?;

    let (table, attr_digest) = read_attr_table(&attr_file)?;
    if !image_root.is_dir() {
        bail!("image root is not a directory: {}", image_root.display());
    }
    let attr_idx = table.attribute_index(&attr)?;
    let split = make_split(&table, &attr, train_n, test_n, seed, balance.0)?;

    if dry_run {
        for id in split.train_ids.iter().chain(&split.test_ids) {
            check_file_exists("image", &image_root.join(id))?;
        }
        println!(
            "dry run ok: {} train / {} test images present under {}",
            split.train_ids.len(),
            split.test_ids.len(),
            image_root.display()
        );
        return Ok(());
    }

    let target = (img_size.0, img_size.1);
    let train_images = load_images(&image_root, &split.train_ids, target)?;
    let test_images = load_images(&image_root, &split.test_ids, target)?;
    let image_digest = digest_tensors(&[&train_images, &test_images]);
    let train_labels = class_labels(&table, attr_idx, &split.train_ids)?;
    let test_labels = class_labels(&table, attr_idx, &split.test_ids)?;

    let channels = train_images
        .first()
        .map(|t| t.shape()[0])
        .ok_or_else(|| anyhow!("empty training split"))?;
    let all_ids = split.train_ids.iter().chain(&split.test_ids);
    for (id, img) in all_ids.zip(train_images.iter().chain(&test_images)) {
        if img.shape()[0] != channels {
            bail!(
                "mixed channel counts: {} has {} channels, expected {channels}",
                id,
                img.shape()[0]
            );
        }
    }

    let model = cnn::init_model::<f32>((channels, img_size.0, img_size.1), seed)?;
    let (model, history) = cnn::train(
        model,
        &train_images,
        &train_labels,
        Some((&test_images, &test_labels)),
        &config,
    )?;
    let outcome = cnn::evaluate(&model, &test_images, &test_labels, &split.test_ids)?;

    let header = ReportHeader {
        command: "train-cnn".into(),
        seed,
        config: echoed,
        input_digests: vec![
            ("attr-file".into(), attr_digest),
            ("images".into(), image_digest),
        ],
    };
    with_outputs(out_dir, |out| {
        let mut buf = Vec::new();
        write_history(&header, &history, &mut buf)?;
        out.write("history.csv", &buf)?;

        buf.clear();
        write_eval(&header, &outcome, &mut buf)?;
        out.write("eval.csv", &buf)?;

        buf.clear();
        let confusion = confusion_report(&outcome.records, &attr, 0.5)?;
        write_confusion(&header, &confusion, &mut buf)?;
        out.write("confusion.csv", &buf)?;

        save_checkpoint(&model, &out.path("model.ckpt"))?;
        out.record("model.ckpt");
        Ok(())
    })?;
    print_accuracy(&outcome);
    Ok(())
}

fn probe_text(probe: &LinearProbe) -> String {
    let mut text = String::new();
    text.push_str(&format!("dim: {}\n", probe.dim));
    text.push_str(&format!("attribute: {}\n", probe.metadata.attribute));
    text.push_str(&format!(
        "trained-on: {} train / {} test, seed {}\n",
        probe.metadata.n_train, probe.metadata.n_test, probe.metadata.seed
    ));
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    text.push_str(&format!("bias: {}\n", join(&probe.bias)));
    text.push_str(&format!(
        "weights-negative: {}\n",
        join(&probe.weights[..probe.dim])
    ));
    text.push_str(&format!(
        "weights-positive: {}\n",
        join(&probe.weights[probe.dim..])
    ));
    text.push_str(&format!(
        "standardize-means: {}\n",
        join(&probe.standardization.means)
    ));
    text.push_str(&format!(
        "standardize-stds: {}\n",
        join(&probe.standardization.stds)
    ));
    text
}

pub fn train_probe_cmd(args: TrainProbeArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let attr_file = r.require_path("attr-file", args.attr_file)?;
    let embeddings_file = r.require_path("embeddings-file", args.embeddings_file)?;
    let attr = r.require::<String>("attr", args.attr)?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let train_n = r.get("train-n", args.train_n, 1500usize)?;
    let test_n = r.get("test-n", args.test_n, 500usize)?;
    let balance = r.get(
        "balance",
        args.balance,
        crate::config::Balance(BalanceMode::TrainOnly),
    )?;
    let config = ProbeConfig {
        learning_rate: r.get("lr", args.lr, 0.01)?,
        momentum: r.get("momentum", args.momentum, 0.9)?,
        l2: r.get("l2", args.l2, 1e-4)?,
        batch_size: r.get("batch-size", args.batch_size, 64usize)?,
        epochs: r.get("epochs", args.epochs, 30usize)?,
        seed,
    };
    let dry_run = r.get_switch("dry-run", args.dry_run)?;
    let echoed = r.finish()?;

    let (table, attr_digest) = read_attr_table(&attr_file)?;
    check_file_exists("embeddings file", &embeddings_file)?;
    let emb_bytes = std::fs::read(&embeddings_file)
        .with_context(|| format!("cannot read {}", embeddings_file.display()))?;
    let embeddings = parse_embeddings(&emb_bytes[..])
        .with_context(|| format!("in embeddings file {}", embeddings_file.display()))?;
    let emb_digest = sha256_hex(&emb_bytes);

    table.attribute_index(&attr)?;
    let split: Split = make_split(&table, &attr, train_n, test_n, seed, balance.0)?;

    // Surface missing embeddings before any training.
    for id in split.train_ids.iter().chain(&split.test_ids) {
        if embeddings.vector(id).is_none() {
            bail!("embedding missing for image id '{id}'");
        }
    }
    if dry_run {
        println!(
            "dry run ok: {} train / {} test embeddings of dim {}",
            split.train_ids.len(),
            split.test_ids.len(),
            embeddings.dim()
        );
        return Ok(());
    }

    let (probe, history) = train_probe(&embeddings, &table, &split, &config)?;
    let outcome = evaluate_probe(&probe, &embeddings, &table, &attr, &split.test_ids)?;

    let header = ReportHeader {
        command: "train-probe".into(),
        seed,
        config: echoed,
        input_digests: vec![
            ("attr-file".into(), attr_digest),
            ("embeddings-file".into(), emb_digest),
        ],
    };
    with_outputs(out_dir, |out| {
        let mut buf = Vec::new();
        write_history(&header, &history, &mut buf)?;
        out.write("history.csv", &buf)?;

        buf.clear();
        write_eval(&header, &outcome, &mut buf)?;
        out.write("eval.csv", &buf)?;

        buf.clear();
        let confusion = confusion_report(&outcome.records, &attr, 0.5)?;
        write_confusion(&header, &confusion, &mut buf)?;
        out.write("confusion.csv", &buf)?;

        let mut text = Vec::new();
        header.write(&mut text)?;
        text.extend_from_slice(probe_text(&probe).as_bytes());
        out.write("probe.txt", &text)?;
        Ok(())
    })?;
    print_accuracy(&outcome);
    Ok(())
}

pub fn audit_cooccur(args: AuditCooccurArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let attr_file = r.require_path("attr-file", args.attr_file)?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let metric_name = r.get("metric", args.metric, "jaccard".to_string())?;
    let echoed = r.finish()?;

    let metric = CooccurrenceMetric::parse(&metric_name)?;
    let (table, attr_digest) = read_attr_table(&attr_file)?;
    let matrix = cooccurrence(&table, metric)?;
    let header = ReportHeader {
        command: "audit cooccur".into(),
        seed,
        config: echoed,
        input_digests: vec![("attr-file".into(), attr_digest)],
    };
    with_outputs(out_dir, |out| {
        let mut buf = Vec::new();
        write_cooccurrence(&header, &matrix, &mut buf)?;
        out.write("cooccur.csv", &buf)?;

        let (w, h, samples) = matrix.heatmap_samples(8);
        write_pgm(&out.path("cooccur.pgm"), w, h, &samples)?;
        out.record("cooccur.pgm");
        Ok(())
    })?;
    println!(
        "co-occurrence ({}) over {} attributes written",
        metric.as_str(),
        matrix.names.len()
    );
    Ok(())
}

pub fn audit_tree(args: AuditTreeArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let attr_file = r.require_path("attr-file", args.attr_file)?;
    let attr = r.require::<String>("attr", args.attr)?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let max_depth = r.get("max-depth", args.max_depth, 5usize)?;
    let min_leaf = r.get("min-leaf", args.min_leaf, 1usize)?;
    let sample_n = r.get_opt("sample-n", args.sample_n)?;
    let echoed = r.finish()?;

    let (table, attr_digest) = read_attr_table(&attr_file)?;
    let table = match sample_n {
        Some(n) if n < table.len() => subsample(&table, n, seed)?,
        _ => table,
    };
    let tree = fit_tree(&table, &attr, max_depth, min_leaf)?;
    let accuracy = tree.train_accuracy(&table)?;

    let header = ReportHeader {
        command: "audit tree".into(),
        seed,
        config: echoed,
        input_digests: vec![("attr-file".into(), attr_digest)],
    };
    with_outputs(out_dir, |out| {
        let mut buf = Vec::new();
        header.write(&mut buf)?;
        buf.extend_from_slice(tree.render().as_bytes());
        buf.extend_from_slice(
            format!(
                "\ndepth: {}\ntraining accuracy: {:.4} over {} records\n",
                tree.depth(),
                accuracy,
                table.len()
            )
            .as_bytes(),
        );
        out.write("tree.txt", &buf)?;
        Ok(())
    })?;
    println!(
        "tree depth {} fits '{}' at {:.2}% training accuracy",
        tree.depth(),
        attr,
        accuracy * 100.0
    );
    Ok(())
}

fn subsample(table: &AttributeTable, n: usize, seed: u64) -> Result<AttributeTable> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    facekit::rng::shuffle(&mut order, &mut facekit::rng::substream(seed, "tree-sample"));
    order.truncate(n);
    let records = order
        .into_iter()
        .map(|i| table.records()[i].clone())
        .collect();
    AttributeTable::new(table.attribute_names().to_vec(), records).map_err(Into::into)
}

pub fn audit_confusion(args: AuditConfusionArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let eval_file = r.require_path("eval-file", args.eval_file)?;
    let attr = r.get("attr", args.attr, "target".to_string())?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let threshold = r.get("threshold", args.threshold, 0.5)?;
    let echoed = r.finish()?;

    check_file_exists("eval file", &eval_file)?;
    let text = std::fs::read_to_string(&eval_file)
        .with_context(|| format!("cannot read {}", eval_file.display()))?;
    let records = read_eval_records(&text)?;
    let report = confusion_report(&records, &attr, threshold)?;

    let header = ReportHeader {
        command: "audit confusion".into(),
        seed,
        config: echoed,
        input_digests: vec![("eval-file".into(), sha256_hex(text.as_bytes()))],
    };
    with_outputs(out_dir, |out| {
        let mut buf = Vec::new();
        write_confusion(&header, &report, &mut buf)?;
        out.write("confusion.csv", &buf)?;
        Ok(())
    })?;
    println!(
        "confusion: TP {} FP {} TN {} FN {}",
        report.counts.true_positive,
        report.counts.false_positive,
        report.counts.true_negative,
        report.counts.false_negative
    );
    Ok(())
}

pub fn audit_noise(args: AuditNoiseArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let eval_file = r.require_path("eval-file", args.eval_file)?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let top_k = r.get("top-k", args.top_k, 50usize)?;
    let echoed = r.finish()?;

    check_file_exists("eval file", &eval_file)?;
    let text = std::fs::read_to_string(&eval_file)
        .with_context(|| format!("cannot read {}", eval_file.display()))?;
    let records = read_eval_records(&text)?;
    let candidates = mine_label_noise(&records, top_k)?;

    let header = ReportHeader {
        command: "audit noise".into(),
        seed,
        config: echoed,
        input_digests: vec![("eval-file".into(), sha256_hex(text.as_bytes()))],
    };
    with_outputs(out_dir, |out| {
        let mut buf = Vec::new();
        write_noise(&header, &candidates, &mut buf)?;
        out.write("noise.csv", &buf)?;
        Ok(())
    })?;
    println!(
        "{} label-noise candidates written (top {top_k} requested)",
        candidates.len()
    );
    Ok(())
}

pub fn audit_workload(args: AuditWorkloadArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let seed = r.get("seed", args.common.seed, 42u64)?;
    let out_dir = r.get_path("out", args.common.out, "out")?;
    let n_features = r.get("n-features", args.n_features, 40u64)?;
    let images_per_hour = r.get_opt("images-per-hour", args.images_per_hour)?;
    let n_images = r.get("n-images", args.n_images, 202_599u64)?;
    let n_workers = r.get("n-workers", args.n_workers, 50u64)?;
    let days = r.get("days", args.days, 90u64)?;
    let hours_per_day = r.get("hours-per-day", args.hours_per_day, 8.0)?;
    let redundancy = r.get("redundancy", args.redundancy, 1u64)?;
    let echoed = r.finish()?;

    let header = ReportHeader {
        command: "audit workload".into(),
        seed,
        config: echoed,
        input_digests: Vec::new(),
    };

    let rate = match images_per_hour {
        Some(iph) => {
            // Direct mode: the labelling speed is given, not derived.
            if iph <= 0.0 {
                bail!("images-per-hour must be positive, got {iph}");
            }
            let rate = decisions_per_minute(iph, n_features);
            with_outputs(out_dir, |out| {
                let mut buf = Vec::new();
                header.write(&mut buf)?;
                buf.extend_from_slice(
                    format!(
                        "images per worker-hour:      {iph:.2}\n\
                         features per image:          {n_features}\n\
                         decisions per worker-minute: {rate:.2}\n"
                    )
                    .as_bytes(),
                );
                out.write("workload.txt", &buf)?;
                Ok(())
            })?;
            rate
        }
        None => {
            let estimate = workload_estimate(WorkloadInputs {
                n_images,
                n_features,
                n_workers,
                days,
                hours_per_day,
                redundancy,
            })?;
            with_outputs(out_dir, |out| {
                let mut buf = Vec::new();
                write_workload(&header, &estimate, &mut buf)?;
                out.write("workload.txt", &buf)?;
                Ok(())
            })?;
            estimate.decisions_per_worker_minute
        }
    };
    println!("decisions per worker-minute: {rate:.2}");
    Ok(())
}

pub fn inspect(args: InspectArgs) -> Result<()> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let attr_file = r.require_path("attr-file", args.attr_file)?;
    let embeddings_file = r.get_opt::<String>("embeddings-file", args.embeddings_file.map(|p| p.display().to_string()))?;
    let _seed = r.get("seed", args.common.seed, 42u64)?;
    let _out = r.get_path("out", args.common.out, "out")?;
    r.finish()?;

    let (table, _) = read_attr_table(&attr_file)?;
    println!(
        "{} records, {} attributes",
        table.len(),
        table.n_attributes()
    );
    for (i, name) in table.attribute_names().iter().enumerate() {
        let positives = table
            .records()
            .iter()
            .filter(|rec| rec.labels[i] == 1)
            .count();
        let rate = if table.is_empty() {
            0.0
        } else {
            positives as f64 / table.len() as f64
        };
        println!("  {name}: {positives} positive ({:.1}%)", rate * 100.0);
    }
    if let Some(path) = embeddings_file {
        let path = PathBuf::from(path);
        check_file_exists("embeddings file", &path)?;
        let bytes =
            std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let embeddings = parse_embeddings(&bytes[..])?;
        println!(
            "embeddings: {} vectors of dim {}",
            embeddings.len(),
            embeddings.dim()
        );
    }
    Ok(())
}
