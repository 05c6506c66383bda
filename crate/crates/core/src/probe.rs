//! Softmax linear probe over fixed embedding vectors: the
//! fixed-feature-extractor transfer strategy. The embeddings come from an
//! external pretrained network; this module only consumes them.
//!
//! Training is minibatch momentum SGD on softmax cross-entropy with an L2
//! penalty on the weights, after per-dimension standardization fitted on
//! the training split. All arithmetic is `f64`.

use crate::cnn::{EpochStats, History};
use crate::data::{AttributeTable, EmbeddingTable, Split};
use crate::error::{Error, Result};
use crate::eval::{predict_class, EvalOutcome, EvalRecord};
use crate::layers::{cross_entropy, softmax, softmax_cross_entropy_backward};
use crate::optim::SgdHyper;
use crate::rng::substream_at;

pub const N_CLASSES: usize = 2;

/// Per-dimension affine transform fitted on the training split and
/// applied identically at evaluation time.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Self {
        Standardization {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    fn fit(vectors: &[&[f64]], dim: usize) -> Self {
        let n = vectors.len().max(1) as f64;
        let mut means = vec![0.0; dim];
        for v in vectors {
            for (m, &x) in means.iter_mut().zip(*v) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; dim];
        for v in vectors {
            for (s, (&x, &m)) in stds.iter_mut().zip(v.iter().zip(&means)) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            // Constant dimensions carry no signal; map them to zero.
            if *s < 1e-8 {
                *s = 1.0;
            }
        }
        Standardization { means, stds }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeMetadata {
    pub attribute: String,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Weight matrix + bias for softmax classification of embedding vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    /// Row-major `[2, dim]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub dim: usize,
    pub standardization: Standardization,
    pub metadata: ProbeMetadata,
}

impl LinearProbe {
    pub fn zeros(dim: usize, metadata: ProbeMetadata) -> Self {
        LinearProbe {
            weights: vec![0.0; N_CLASSES * dim],
            bias: vec![0.0; N_CLASSES],
            dim,
            standardization: Standardization::identity(dim),
            metadata,
        }
    }

    /// Class probabilities for a raw (unstandardized) embedding vector.
    pub fn predict(&self, vector: &[f64]) -> Result<Vec<f64>> {
        if vector.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "embedding has {} dims, probe expects {}",
                vector.len(),
                self.dim
            )));
        }
        let x = self.standardization.apply(vector);
        Ok(softmax(&logits(&self.weights, &self.bias, &x)))
    }
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            l2: 1e-4,
            batch_size: 64,
            epochs: 30,
            seed: 42,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        SgdHyper {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
        .validate()?;
        if self.l2 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "l2 penalty must be nonnegative, got {}",
                self.l2
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch size and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn logits(weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    (0..N_CLASSES)
        .map(|cls| {
            let row = &weights[cls * dim..(cls + 1) * dim];
            bias[cls] + row.iter().zip(x).map(|(&w, &v)| w * v).sum::<f64>()
        })
        .collect()
}

/// Mean loss (cross-entropy + L2) and its gradients over a batch of
/// standardized vectors. Exposed within the crate for gradient checks.
pub(crate) fn batch_loss_and_grads(
    weights: &[f64],
    bias: &[f64],
    xs: &[&[f64]],
    ys: &[u8],
    l2: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let dim = weights.len() / N_CLASSES;
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; N_CLASSES];
    for (x, &y) in xs.iter().zip(ys) {
        let probs = softmax(&logits(weights, bias, x));
        loss += cross_entropy(&probs, y as usize)?;
        let d = softmax_cross_entropy_backward(&probs, y as usize)?;
        for cls in 0..N_CLASSES {
            grad_b[cls] += d[cls];
            let row = &mut grad_w[cls * dim..(cls + 1) * dim];
            for (g, &v) in row.iter_mut().zip(*x) {
                *g += d[cls] * v;
            }
        }
    }
    loss /= n;
    for g in &mut grad_w {
        *g /= n;
    }
    for g in &mut grad_b {
        *g /= n;
    }
    // L2 penalty on weights only.
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * l2;
    loss += penalty;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g += 2.0 * l2 * w;
    }
    Ok((loss, grad_w, grad_b))
}

fn gather<'a>(
    embeddings: &'a EmbeddingTable,
    table: &AttributeTable,
    attr: usize,
    ids: &[String],
) -> Result<(Vec<&'a [f64]>, Vec<u8>)> {
    let mut xs = Vec::with_capacity(ids.len());
    let mut ys = Vec::with_capacity(ids.len());
    for id in ids {
        let v = embeddings
            .vector(id)
            .ok_or_else(|| Error::MissingRecord(format!("embedding for image id '{id}'")))?;
        let label = table.label(id, attr)?;
        xs.push(v);
        ys.push(if label == 1 { 1u8 } else { 0u8 });
    }
    Ok((xs, ys))
}

/// Train a probe for `split.target_attribute` on the split's training
/// ids. Every id must be present in both tables.
pub fn train_probe(
    embeddings: &EmbeddingTable,
    table: &AttributeTable,
    split: &Split,
    config: &ProbeConfig,
) -> Result<(LinearProbe, History)> {
    config.validate()?;
    if split.train_ids.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let attr = table.attribute_index(&split.target_attribute)?;
    let (raw_xs, ys) = gather(embeddings, table, attr, &split.train_ids)?;
    let dim = embeddings.dim();

    let standardization = Standardization::fit(&raw_xs, dim);
    let xs: Vec<Vec<f64>> = raw_xs.iter().map(|v| standardization.apply(v)).collect();

    let mut probe = LinearProbe::zeros(
        dim,
        ProbeMetadata {
            attribute: split.target_attribute.clone(),
            n_train: split.train_ids.len(),
            n_test: split.test_ids.len(),
            seed: config.seed,
        },
    );
    probe.standardization = standardization;

    // Standardized test vectors for the per-epoch accuracy column.
    let (test_xs, test_ys) = gather(embeddings, table, attr, &split.test_ids)?;
    let test_xs: Vec<Vec<f64>> = test_xs
        .iter()
        .map(|v| probe.standardization.apply(v))
        .collect();

    let mut vel_w = vec![0.0; probe.weights.len()];
    let mut vel_b = vec![0.0; probe.bias.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        crate::rng::shuffle(
            &mut order,
            &mut substream_at(config.seed, "probe-shuffle", &[epoch as u64]),
        );

        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        let mut correct = 0usize;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<u8> = batch.iter().map(|&i| ys[i]).collect();
            let (loss, gw, gb) = batch_loss_and_grads(&probe.weights, &probe.bias, &bx, &by, config.l2)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: batch_idx + 1,
                });
            }
            for (x, &y) in bx.iter().zip(&by) {
                let probs = softmax(&logits(&probe.weights, &probe.bias, x));
                if predict_class(probs[1]) == y {
                    correct += 1;
                }
            }
            for ((w, v), g) in probe.weights.iter_mut().zip(&mut vel_w).zip(&gw) {
                *v = config.momentum * *v - config.learning_rate * g;
                *w += *v;
            }
            for ((b, v), g) in probe.bias.iter_mut().zip(&mut vel_b).zip(&gb) {
                *v = config.momentum * *v - config.learning_rate * g;
                *b += *v;
            }
            epoch_loss += loss;
            n_batches += 1;
        }
        let test_accuracy = if test_xs.is_empty() {
            None
        } else {
            let hits = test_xs
                .iter()
                .zip(&test_ys)
                .filter(|(x, &y)| {
                    let probs = softmax(&logits(&probe.weights, &probe.bias, x));
                    predict_class(probs[1]) == y
                })
                .count();
            Some(hits as f64 / test_xs.len() as f64)
        };
        history.push(EpochStats {
            epoch: epoch + 1,
            loss: epoch_loss / n_batches as f64,
            train_accuracy: correct as f64 / xs.len() as f64,
            test_accuracy,
        });
    }
    Ok((probe, history))
}

/// Evaluate a probe over `ids`, producing the same result type as the
/// CNN evaluator.
pub fn evaluate_probe(
    probe: &LinearProbe,
    embeddings: &EmbeddingTable,
    table: &AttributeTable,
    attribute: &str,
    ids: &[String],
) -> Result<EvalOutcome> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let attr = table.attribute_index(attribute)?;
    let (xs, ys) = gather(embeddings, table, attr, ids)?;
    let records = xs
        .iter()
        .zip(&ys)
        .zip(ids)
        .map(|((x, &y), id)| {
            let probs = probe.predict(x)?;
            Ok(EvalRecord {
                image_id: id.clone(),
                true_label: y,
                predicted: predict_class(probs[1]),
                prob_positive: probs[1],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalOutcome::from_records(records)
}

/// Finite-difference check of the probe loss gradients. Returns the
/// maximum relative error over all weight and bias coordinates.
pub fn gradient_check_probe(
    weights: &[f64],
    bias: &[f64],
    xs: &[&[f64]],
    ys: &[u8],
    l2: f64,
    epsilon: f64,
) -> Result<f64> {
    fn set(w: &mut [f64], b: &mut [f64], i: usize, v: f64) {
        if i < w.len() {
            w[i] = v;
        } else {
            b[i - w.len()] = v;
        }
    }

    let (_, gw, gb) = batch_loss_and_grads(weights, bias, xs, ys, l2)?;
    let mut w = weights.to_vec();
    let mut b = bias.to_vec();
    let mut max_rel: f64 = 0.0;
    for i in 0..w.len() + b.len() {
        let analytic = if i < gw.len() { gw[i] } else { gb[i - gw.len()] };
        let orig = if i < w.len() { w[i] } else { b[i - w.len()] };
        set(&mut w, &mut b, i, orig + epsilon);
        let (plus, _, _) = batch_loss_and_grads(&w, &b, xs, ys, l2)?;
        set(&mut w, &mut b, i, orig - epsilon);
        let (minus, _, _) = batch_loss_and_grads(&w, &b, xs, ys, l2)?;
        set(&mut w, &mut b, i, orig);
        let numeric = (plus - minus) / (2.0 * epsilon);
        max_rel = max_rel.max(crate::gradcheck::relative_error(numeric, analytic));
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn standardized_batch(seed: u64, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = substream(seed, "probe-test");
        let xs = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys = (0..n).map(|i| (i % 2) as u8).collect();
        (xs, ys)
    }

    #[test]
    fn zero_probe_predicts_uniform() {
        let probe = LinearProbe::zeros(
            4,
            ProbeMetadata {
                attribute: "x".into(),
                n_train: 0,
                n_test: 0,
                seed: 0,
            },
        );
        let probs = probe.predict(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(probs, vec![0.5, 0.5]);
        assert_eq!(predict_class(probs[1]), 0);
    }

    #[test]
    fn gradients_pass_finite_difference_check_tightly() {
        let (xs, ys) = standardized_batch(5, 6, 5);
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let mut rng = substream(6, "probe-test");
        let weights: Vec<f64> = (0..10).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let bias: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let err = gradient_check_probe(&weights, &bias, &refs, &ys, 1e-4, 1e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn full_batch_descent_never_increases_loss() {
        // Convexity check: step 1e-3, loss must be nonincreasing.
        let (xs, ys) = standardized_batch(7, 32, 8);
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let mut w = vec![0.0; 16];
        let mut b = vec![0.0; 2];
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let (loss, gw, gb) = batch_loss_and_grads(&w, &b, &refs, &ys, 1e-4).unwrap();
            assert!(loss <= prev + 1e-12, "loss rose from {prev} to {loss}");
            prev = loss;
            for (w, g) in w.iter_mut().zip(&gw) {
                *w -= 1e-3 * g;
            }
            for (b, g) in b.iter_mut().zip(&gb) {
                *b -= 1e-3 * g;
            }
        }
    }

    #[test]
    fn standardization_maps_constant_dims_to_zero() {
        let vectors = [
            vec![1.0, 5.0, 2.0],
            vec![3.0, 5.0, 4.0],
            vec![5.0, 5.0, 6.0],
        ];
        let refs: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
        let s = Standardization::fit(&refs, 3);
        for v in &refs {
            let z = s.apply(v);
            assert_eq!(z[1], 0.0);
        }
    }

    #[test]
    fn rescaling_embeddings_and_weights_preserves_labels() {
        // Scale inputs by c and weights by 1/c: argmax is unchanged.
        let (xs, _) = standardized_batch(8, 10, 4);
        let mut rng = substream(9, "probe-test");
        let weights: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias = vec![0.3, -0.2];
        let meta = ProbeMetadata {
            attribute: "x".into(),
            n_train: 0,
            n_test: 0,
            seed: 0,
        };
        for c in [2.0f64, 3.0, 0.25] {
            let mut probe = LinearProbe::zeros(4, meta.clone());
            probe.weights = weights.clone();
            probe.bias = bias.clone();
            let mut scaled = probe.clone();
            for w in &mut scaled.weights {
                *w /= c;
            }
            for x in &xs {
                let original = probe.predict(x).unwrap();
                let rescaled: Vec<f64> = x.iter().map(|&v| v * c).collect();
                let scaled_probs = scaled.predict(&rescaled).unwrap();
                assert_eq!(
                    predict_class(original[1]),
                    predict_class(scaled_probs[1]),
                    "c={c}"
                );
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let probe = LinearProbe::zeros(
            4,
            ProbeMetadata {
                attribute: "x".into(),
                n_train: 0,
                n_test: 0,
                seed: 0,
            },
        );
        assert!(probe.predict(&[1.0, 2.0]).is_err());
    }
}
