//! Facial-attribute classification pipelines and dataset audit tools.
//!
//! Two classifiers over the same attribute tables: a small convolutional
//! network trained end to end on raw pixels ([`cnn`]), and a softmax
//! linear probe over embedding vectors produced by an external
//! pretrained extractor ([`probe`]). Around them, dataset forensics
//! ([`audit`]): attribute co-occurrence, decision-tree explanations,
//! confusion mining, label-noise candidates and annotation-workload
//! arithmetic.
//!
//! All layer gradients are hand-derived and verified against central
//! finite differences ([`gradcheck`]); every random draw flows from one
//! seed through named substreams ([`rng`]), so runs are reproducible
//! bit for bit.

pub mod audit;
pub mod cnn;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod probe;
pub mod report;
pub mod rng;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Element, Tensor};
