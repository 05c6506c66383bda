//! Confusion tally with ranked error lists.

use crate::error::{Error, Result};
use crate::eval::{ClassCounts, EvalRecord};

/// TP/FP/TN/FN cells plus the misclassified images, most confident first.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionReport {
    pub target_attribute: String,
    pub threshold: f64,
    pub counts: ClassCounts,
    /// Predicted positive, labelled negative; (id, predicted-class probability).
    pub false_positives: Vec<(String, f64)>,
    /// Predicted negative, labelled positive.
    pub false_negatives: Vec<(String, f64)>,
}

/// Assign each record to a confusion cell by thresholding its positive
/// probability, and rank the errors by the confidence of the wrong
/// prediction.
pub fn confusion_report(
    records: &[EvalRecord],
    target_attribute: &str,
    threshold: f64,
) -> Result<ConfusionReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    let mut counts = ClassCounts::default();
    let mut false_positives = Vec::new();
    let mut false_negatives = Vec::new();
    for r in records {
        let predicted_positive = r.prob_positive > threshold;
        match (predicted_positive, r.true_label == 1) {
            (true, true) => counts.true_positive += 1,
            (false, false) => counts.true_negative += 1,
            (true, false) => {
                counts.false_positive += 1;
                false_positives.push((r.image_id.clone(), r.prob_positive));
            }
            (false, true) => {
                counts.false_negative += 1;
                false_negatives.push((r.image_id.clone(), 1.0 - r.prob_positive));
            }
        }
    }
    let by_confidence = |a: &(String, f64), b: &(String, f64)| {
        b.1.partial_cmp(&a.1)
            .expect("finite probabilities")
            .then_with(|| a.0.cmp(&b.0))
    };
    false_positives.sort_by(by_confidence);
    false_negatives.sort_by(by_confidence);
    Ok(ConfusionReport {
        target_attribute: target_attribute.to_string(),
        threshold,
        counts,
        false_positives,
        false_negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: usize, true_label: u8, prob: f64) -> EvalRecord {
        EvalRecord {
            image_id: format!("img{id:03}.jpg"),
            true_label,
            predicted: u8::from(prob > 0.5),
            prob_positive: prob,
        }
    }

    #[test]
    fn perfect_predictions_leave_error_lists_empty() {
        let records: Vec<EvalRecord> = (0..20)
            .map(|i| {
                let label = (i % 2) as u8;
                record(i, label, if label == 1 { 0.9 } else { 0.1 })
            })
            .collect();
        let report = confusion_report(&records, "x", 0.5).unwrap();
        assert!(report.false_positives.is_empty());
        assert!(report.false_negatives.is_empty());
        assert_eq!(report.counts.true_positive, 10);
        assert_eq!(report.counts.true_negative, 10);
    }

    #[test]
    fn all_positive_predictor_on_balanced_set() {
        let records: Vec<EvalRecord> = (0..100)
            .map(|i| record(i, (i % 2) as u8, 0.99))
            .collect();
        let report = confusion_report(&records, "x", 0.5).unwrap();
        assert_eq!(report.counts.false_positive, 50);
        assert_eq!(report.counts.true_positive, 50);
        assert_eq!(report.counts.total(), 100);
    }

    #[test]
    fn counts_match_independent_tally() {
        let records: Vec<EvalRecord> = (0..61)
            .map(|i| record(i, (i % 2) as u8, (i % 10) as f64 / 10.0))
            .collect();
        let report = confusion_report(&records, "x", 0.5).unwrap();

        // Oracle: recount every cell directly.
        let mut tally = [0usize; 4];
        for r in &records {
            let idx = match (r.prob_positive > 0.5, r.true_label == 1) {
                (true, true) => 0,
                (true, false) => 1,
                (false, false) => 2,
                (false, true) => 3,
            };
            tally[idx] += 1;
        }
        assert_eq!(report.counts.true_positive, tally[0]);
        assert_eq!(report.counts.false_positive, tally[1]);
        assert_eq!(report.counts.true_negative, tally[2]);
        assert_eq!(report.counts.false_negative, tally[3]);
        assert_eq!(report.counts.total(), records.len());
    }

    #[test]
    fn error_lists_are_sorted_most_confident_first() {
        let records = vec![
            record(0, 0, 0.7),
            record(1, 0, 0.95),
            record(2, 0, 0.8),
            record(3, 1, 0.1),
            record(4, 1, 0.4),
        ];
        let report = confusion_report(&records, "x", 0.5).unwrap();
        let fp_probs: Vec<f64> = report.false_positives.iter().map(|e| e.1).collect();
        assert_eq!(fp_probs, vec![0.95, 0.8, 0.7]);
        // FN confidence is the predicted (negative) class probability.
        let fn_probs: Vec<f64> = report.false_negatives.iter().map(|e| e.1).collect();
        assert_eq!(fn_probs, vec![0.9, 0.6]);
    }

    #[test]
    fn each_error_id_appears_exactly_once() {
        let records: Vec<EvalRecord> = (0..50)
            .map(|i| record(i, ((i / 3) % 2) as u8, (i % 7) as f64 / 7.0))
            .collect();
        let report = confusion_report(&records, "x", 0.5).unwrap();
        let mut ids: Vec<&String> = report
            .false_positives
            .iter()
            .chain(&report.false_negatives)
            .map(|(id, _)| id)
            .collect();
        let before = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), before);
        assert_eq!(
            before,
            report.counts.false_positive + report.counts.false_negative
        );
    }

    #[test]
    fn bad_threshold_rejected() {
        assert!(confusion_report(&[], "x", 1.5).is_err());
    }
}
