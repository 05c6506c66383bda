//! Dataset forensics: attribute co-occurrence, decision-tree explanation
//! of a target attribute, confusion mining, label-noise candidates and
//! annotation-workload arithmetic. All pure functions over in-memory
//! tables.

mod confusion;
mod cooccurrence;
mod noise;
mod tree;
mod workload;

pub use confusion::{confusion_report, ConfusionReport};
pub use cooccurrence::{cooccurrence, CooccurrenceMatrix, CooccurrenceMetric};
pub use noise::{mine_label_noise, NoiseCandidate};
pub use tree::{entropy, fit_tree, tree_predict, DecisionTree, TreeNode};
pub use workload::{decisions_per_minute, workload_estimate, WorkloadEstimate, WorkloadInputs};
