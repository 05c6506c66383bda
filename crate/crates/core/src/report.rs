//! Deterministic report serialization.
//!
//! Every report file starts with a `#`-prefixed header echoing the
//! artifact version, the fully resolved configuration, the seed and
//! content digests of the input files, so two runs with identical
//! headers have identical bodies.

use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::audit::{ConfusionReport, CooccurrenceMatrix, NoiseCandidate, WorkloadEstimate};
use crate::cnn::History;
use crate::error::{Error, Result};
use crate::eval::{EvalOutcome, EvalRecord};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default)]
pub struct ReportHeader {
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration, echoed sorted by key.
    pub config: Vec<(String, String)>,
    /// (input name, sha256 hex) pairs.
    pub input_digests: Vec<(String, String)>,
}

impl ReportHeader {
    pub fn write(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# facekit {ARTIFACT_VERSION}")?;
        writeln!(out, "# command: {}", self.command)?;
        writeln!(out, "# seed: {}", self.seed)?;
        let mut config = self.config.clone();
        config.sort();
        for (key, value) in &config {
            writeln!(out, "# config {key} = {value}")?;
        }
        for (name, digest) in &self.input_digests {
            writeln!(out, "# input {name} sha256 {digest}")?;
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// `history.csv`: epoch, loss, train_acc, test_acc (blank when the epoch
/// was not evaluated).
pub fn write_history(header: &ReportHeader, history: &History, out: &mut impl Write) -> io::Result<()> {
    header.write(out)?;
    writeln!(out, "epoch,loss,train_acc,test_acc")?;
    for row in history {
        let test = row
            .test_accuracy
            .map(|a| format!("{a:.6}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{:.6},{:.6},{}",
            row.epoch, row.loss, row.train_accuracy, test
        )?;
    }
    Ok(())
}

/// `eval.csv`: one row per test image.
pub fn write_eval(header: &ReportHeader, outcome: &EvalOutcome, out: &mut impl Write) -> io::Result<()> {
    header.write(out)?;
    writeln!(out, "# accuracy: {:.6}", outcome.accuracy)?;
    writeln!(out, "image_id,true_label,predicted,prob_positive")?;
    for r in &outcome.records {
        writeln!(
            out,
            "{},{},{},{:.9}",
            r.image_id, r.true_label, r.predicted, r.prob_positive
        )?;
    }
    Ok(())
}

/// Parse an `eval.csv` produced by [`write_eval`] (headers skipped), for
/// the audit subcommands that consume a previous run's evaluation.
pub fn read_eval_records(text: &str) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::new();
    for (lineno0, line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("image_id,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let parse_u8 = |s: &str| -> Result<u8> {
            match s {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::parse(lineno, format!("label must be 0/1, got '{other}'"))),
            }
        };
        let prob: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad probability '{}'", fields[3])))?;
        if !prob.is_finite() {
            return Err(Error::parse(lineno, "non-finite probability"));
        }
        records.push(EvalRecord {
            image_id: fields[0].to_string(),
            true_label: parse_u8(fields[1])?,
            predicted: parse_u8(fields[2])?,
            prob_positive: prob,
        });
    }
    Ok(records)
}

/// `confusion.csv`: cell counts, then the ranked error lists.
pub fn write_confusion(
    header: &ReportHeader,
    report: &ConfusionReport,
    out: &mut impl Write,
) -> io::Result<()> {
    header.write(out)?;
    writeln!(out, "# target: {}", report.target_attribute)?;
    writeln!(out, "# threshold: {}", report.threshold)?;
    writeln!(out, "cell,count")?;
    writeln!(out, "true_positive,{}", report.counts.true_positive)?;
    writeln!(out, "false_positive,{}", report.counts.false_positive)?;
    writeln!(out, "true_negative,{}", report.counts.true_negative)?;
    writeln!(out, "false_negative,{}", report.counts.false_negative)?;
    writeln!(out, "kind,image_id,confidence")?;
    for (id, p) in &report.false_positives {
        writeln!(out, "false_positive,{id},{p:.9}")?;
    }
    for (id, p) in &report.false_negatives {
        writeln!(out, "false_negative,{id},{p:.9}")?;
    }
    Ok(())
}

/// `cooccur.csv`: named square matrix.
pub fn write_cooccurrence(
    header: &ReportHeader,
    matrix: &CooccurrenceMatrix,
    out: &mut impl Write,
) -> io::Result<()> {
    header.write(out)?;
    writeln!(out, "# metric: {}", matrix.metric.as_str())?;
    if !matrix.empty_attributes.is_empty() {
        let names: Vec<&str> = matrix
            .empty_attributes
            .iter()
            .map(|&i| matrix.names[i].as_str())
            .collect();
        writeln!(out, "# no positive labels: {}", names.join(", "))?;
    }
    writeln!(out, "attribute,{}", matrix.names.join(","))?;
    let f = matrix.names.len();
    for i in 0..f {
        write!(out, "{}", matrix.names[i])?;
        for j in 0..f {
            write!(out, ",{:.6}", matrix.get(i, j))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `noise.csv`: ranked label-noise candidates.
pub fn write_noise(
    header: &ReportHeader,
    candidates: &[NoiseCandidate],
    out: &mut impl Write,
) -> io::Result<()> {
    header.write(out)?;
    writeln!(out, "rank,image_id,confidence,predicted,labeled")?;
    for (rank, c) in candidates.iter().enumerate() {
        writeln!(
            out,
            "{},{},{:.9},{},{}",
            rank + 1,
            c.image_id,
            c.confidence,
            c.predicted,
            c.labeled
        )?;
    }
    Ok(())
}

/// `workload.txt`: human-readable schedule arithmetic.
pub fn write_workload(
    header: &ReportHeader,
    estimate: &WorkloadEstimate,
    out: &mut impl Write,
) -> io::Result<()> {
    header.write(out)?;
    let i = &estimate.inputs;
    writeln!(out, "images:             {}", i.n_images)?;
    writeln!(out, "features per image: {}", i.n_features)?;
    writeln!(out, "workers:            {}", i.n_workers)?;
    writeln!(out, "days:               {}", i.days)?;
    writeln!(out, "hours per day:      {}", i.hours_per_day)?;
    writeln!(out, "redundancy:         {}", i.redundancy)?;
    writeln!(out)?;
    writeln!(out, "total decisions:             {}", estimate.total_decisions)?;
    writeln!(
        out,
        "images per worker-hour:      {:.2}",
        estimate.images_per_worker_hour
    )?;
    writeln!(
        out,
        "decisions per worker-minute: {:.2}",
        estimate.decisions_per_worker_minute
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::EpochStats;

    fn header() -> ReportHeader {
        ReportHeader {
            command: "test".into(),
            seed: 42,
            config: vec![("b".into(), "2".into()), ("a".into(), "1".into())],
            input_digests: vec![("attr".into(), "deadbeef".into())],
        }
    }

    #[test]
    fn header_lines_are_sorted_and_prefixed() {
        let mut buf = Vec::new();
        header().write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let a = text.find("# config a = 1").unwrap();
        let b = text.find("# config b = 2").unwrap();
        assert!(a < b);
        assert!(text.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn history_rows_include_blank_test_column() {
        let history = vec![
            EpochStats {
                epoch: 1,
                loss: 0.625,
                train_accuracy: 0.5,
                test_accuracy: None,
            },
            EpochStats {
                epoch: 2,
                loss: 0.25,
                train_accuracy: 0.875,
                test_accuracy: Some(0.9),
            },
        ];
        let mut buf = Vec::new();
        write_history(&header(), &history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("1,0.625000,0.500000,\n"), "{text}");
        assert!(text.contains("2,0.250000,0.875000,0.900000\n"), "{text}");
    }

    #[test]
    fn eval_round_trips_through_reader() {
        let records = vec![
            EvalRecord {
                image_id: "a.jpg".into(),
                true_label: 1,
                predicted: 0,
                prob_positive: 0.25,
            },
            EvalRecord {
                image_id: "b.jpg".into(),
                true_label: 0,
                predicted: 0,
                prob_positive: 0.1,
            },
        ];
        let outcome = EvalOutcome::from_records(records.clone()).unwrap();
        let mut buf = Vec::new();
        write_eval(&header(), &outcome, &mut buf).unwrap();
        let parsed = read_eval_records(&String::from_utf8(buf).unwrap()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].image_id, records[0].image_id);
        assert_eq!(parsed[0].true_label, records[0].true_label);
        assert!((parsed[0].prob_positive - 0.25).abs() < 1e-9);
    }

    #[test]
    fn malformed_eval_row_rejected() {
        assert!(read_eval_records("a.jpg,1,0\n").is_err());
        assert!(read_eval_records("a.jpg,2,0,0.5\n").is_err());
        assert!(read_eval_records("a.jpg,1,0,oops\n").is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
