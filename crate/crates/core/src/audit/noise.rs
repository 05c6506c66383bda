//! Label-noise candidates: the most confident disagreements between the
//! model and the dataset labels, ranked for human re-inspection.

use crate::error::{Error, Result};
use crate::eval::EvalRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCandidate {
    pub image_id: String,
    /// Probability the model assigns to its own (disagreeing) class.
    pub confidence: f64,
    pub predicted: u8,
    pub labeled: u8,
}

/// Top `k` disagreements by model confidence (descending; ties broken by
/// image id for a stable order).
pub fn mine_label_noise(records: &[EvalRecord], top_k: usize) -> Result<Vec<NoiseCandidate>> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be positive".into()));
    }
    let mut candidates: Vec<NoiseCandidate> = records
        .iter()
        .filter(|r| r.predicted != r.true_label)
        .map(|r| NoiseCandidate {
            image_id: r.image_id.clone(),
            confidence: if r.predicted == 1 {
                r.prob_positive
            } else {
                1.0 - r.prob_positive
            },
            predicted: r.predicted,
            labeled: r.true_label,
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .expect("finite probabilities")
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    candidates.truncate(top_k);
    Ok(candidates)
}
