//! Shared evaluation result type for both classifiers.
//!
//! Attribute label +1 maps to class 1 (positive), -1 to class 0. The
//! per-image records are retained so the audit analyses can re-derive
//! everything from them.

use crate::error::{Error, Result};

/// One test-set prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub image_id: String,
    pub true_label: u8,
    pub predicted: u8,
    /// Model probability of the positive class.
    pub prob_positive: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub accuracy: f64,
    pub counts: ClassCounts,
    pub records: Vec<EvalRecord>,
}

impl EvalOutcome {
    pub fn from_records(records: Vec<EvalRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument(
                "evaluation needs a non-empty record set".into(),
            ));
        }
        let mut counts = ClassCounts::default();
        for r in &records {
            match (r.predicted, r.true_label) {
                (1, 1) => counts.true_positive += 1,
                (1, 0) => counts.false_positive += 1,
                (0, 0) => counts.true_negative += 1,
                (0, 1) => counts.false_negative += 1,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "labels must be 0/1, got predicted={} true={}",
                        r.predicted, r.true_label
                    )))
                }
            }
        }
        let correct = counts.true_positive + counts.true_negative;
        Ok(EvalOutcome {
            accuracy: correct as f64 / records.len() as f64,
            counts,
            records,
        })
    }
}

/// Argmax over a two-class probability pair; ties go to class 0.
pub fn predict_class(prob_positive: f64) -> u8 {
    if prob_positive > 0.5 {
        1
    } else {
        0
    }
}
