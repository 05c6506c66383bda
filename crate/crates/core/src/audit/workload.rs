//! Annotation-workload arithmetic: what a labelling schedule implies for
//! each worker's decision rate.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadInputs {
    pub n_images: u64,
    pub n_features: u64,
    pub n_workers: u64,
    pub days: u64,
    pub hours_per_day: f64,
    /// Independent labelings per image (1 = each image labelled once).
    pub redundancy: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadEstimate {
    pub inputs: WorkloadInputs,
    pub images_per_worker_hour: f64,
    pub decisions_per_worker_minute: f64,
    pub total_decisions: u64,
}

pub fn workload_estimate(inputs: WorkloadInputs) -> Result<WorkloadEstimate> {
    if inputs.n_images == 0
        || inputs.n_features == 0
        || inputs.n_workers == 0
        || inputs.days == 0
        || inputs.hours_per_day <= 0.0
        || inputs.redundancy == 0
    {
        return Err(Error::InvalidArgument(
            "all workload inputs must be positive".into(),
        ));
    }
    let worker_hours = inputs.n_workers as f64 * inputs.days as f64 * inputs.hours_per_day;
    let images_per_worker_hour = (inputs.n_images * inputs.redundancy) as f64 / worker_hours;
    Ok(WorkloadEstimate {
        inputs,
        images_per_worker_hour,
        decisions_per_worker_minute: decisions_per_minute(
            images_per_worker_hour,
            inputs.n_features,
        ),
        total_decisions: inputs.n_images * inputs.n_features * inputs.redundancy,
    })
}

/// Decision rate implied by a per-worker labelling speed: each image
/// needs one decision per feature.
pub fn decisions_per_minute(images_per_worker_hour: f64, n_features: u64) -> f64 {
    images_per_worker_hour * n_features as f64 / 60.0
}
