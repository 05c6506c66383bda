//! The experiment-1 network: [conv → relu → maxpool] ×2 → dense(512) →
//! relu → dropout(0.5) → dense(2) → softmax, trained per attribute with
//! momentum SGD.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{predict_class, EvalOutcome, EvalRecord};
use crate::layers::{
    conv2d, conv2d_backward, cross_entropy, dense, dense_backward, dropout, dropout_backward,
    maxpool2d, maxpool2d_backward, relu, relu_backward, softmax, softmax_cross_entropy_backward,
    Padding,
};
use crate::optim::{sgd_step, SgdHyper};
use crate::rng::{substream, substream_at};
use crate::tensor::{Element, Tensor};

pub const CONV1_FILTERS: usize = 32;
pub const CONV2_FILTERS: usize = 64;
pub const KERNEL_SIZE: usize = 3;
pub const DENSE_UNITS: usize = 512;
pub const N_CLASSES: usize = 2;

/// Number of samples each parallel worker folds sequentially. Fixing the
/// chunk size (rather than deriving it from the thread count) keeps the
/// gradient reduction order identical on any machine.
const GRAD_CHUNK: usize = 8;

/// Parameter tensor order used by gradients, velocities and checkpoints.
pub const PARAM_NAMES: [&str; 8] = [
    "conv1_kernels",
    "conv1_bias",
    "conv2_kernels",
    "conv2_bias",
    "dense1_weights",
    "dense1_bias",
    "dense2_weights",
    "dense2_bias",
];

#[derive(Clone, Debug)]
pub struct CnnModel<T: Element = f32> {
    pub input_size: (usize, usize, usize),
    pub seed: u64,
    pub conv1_kernels: Tensor<T>,
    pub conv1_bias: Tensor<T>,
    pub conv2_kernels: Tensor<T>,
    pub conv2_bias: Tensor<T>,
    pub dense1_weights: Tensor<T>,
    pub dense1_bias: Tensor<T>,
    pub dense2_weights: Tensor<T>,
    pub dense2_bias: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub dropout_rate: f64,
    /// Evaluate on the test set every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 15,
            seed: 42,
            dropout_rate: 0.5,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        SgdHyper {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
        .validate()?;
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.eval_every == 0 {
            return Err(Error::InvalidArgument(
                "batch size, epochs and eval-every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch training statistics; one row of `history.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

pub type History = Vec<EpochStats>;

/// Spatial extent after one 2x2/stride-2 pool (replication-padded).
fn pooled(extent: usize) -> usize {
    extent.div_ceil(2)
}

/// Flattened feature length entering the first dense layer.
pub fn flat_dim(input_size: (usize, usize, usize)) -> usize {
    let (_, h, w) = input_size;
    CONV2_FILTERS * pooled(pooled(h)) * pooled(pooled(w))
}

pub fn init_model<T: Element>(input_size: (usize, usize, usize), seed: u64) -> Result<CnnModel<T>> {
    let (c, h, w) = input_size;
    if c == 0 {
        return Err(Error::InvalidArgument("input needs at least 1 channel".into()));
    }
    if h < 8 || w < 8 {
        return Err(Error::InvalidArgument(format!(
            "input {h}x{w} too small to survive two pooling stages (need at least 8x8)"
        )));
    }
    let mut rng = substream(seed, "init");
    // He-style fan-in scaled uniform; biases start at zero. Weights are
    // drawn as f64 and narrowed so every precision sees the same values.
    let mut scaled_uniform = |shape: &[usize], fan_in: usize| -> Tensor<T> {
        let limit = (6.0 / fan_in as f64).sqrt();
        Tensor::from_fn(shape, |_| {
            T::from_f64(rand::Rng::gen_range(&mut rng, -limit..limit))
        })
    };
    let k2 = KERNEL_SIZE * KERNEL_SIZE;
    let conv1_kernels = scaled_uniform(&[CONV1_FILTERS, c, KERNEL_SIZE, KERNEL_SIZE], c * k2);
    let conv2_kernels = scaled_uniform(
        &[CONV2_FILTERS, CONV1_FILTERS, KERNEL_SIZE, KERNEL_SIZE],
        CONV1_FILTERS * k2,
    );
    let flat = flat_dim(input_size);
    let dense1_weights = scaled_uniform(&[DENSE_UNITS, flat], flat);
    let dense2_weights = scaled_uniform(&[N_CLASSES, DENSE_UNITS], DENSE_UNITS);
    Ok(CnnModel {
        input_size,
        seed,
        conv1_kernels,
        conv1_bias: Tensor::zeros(&[CONV1_FILTERS]),
        conv2_kernels,
        conv2_bias: Tensor::zeros(&[CONV2_FILTERS]),
        dense1_weights,
        dense1_bias: Tensor::zeros(&[DENSE_UNITS]),
        dense2_weights,
        dense2_bias: Tensor::zeros(&[N_CLASSES]),
    })
}

impl<T: Element> CnnModel<T> {
    pub fn params(&self) -> [&Tensor<T>; 8] {
        [
            &self.conv1_kernels,
            &self.conv1_bias,
            &self.conv2_kernels,
            &self.conv2_bias,
            &self.dense1_weights,
            &self.dense1_bias,
            &self.dense2_weights,
            &self.dense2_bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 8] {
        [
            &mut self.conv1_kernels,
            &mut self.conv1_bias,
            &mut self.conv2_kernels,
            &mut self.conv2_bias,
            &mut self.dense1_weights,
            &mut self.dense1_bias,
            &mut self.dense2_weights,
            &mut self.dense2_bias,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|t| t.all_finite())
    }

    /// Precision conversion (f32 ⇄ f64).
    pub fn cast<U: Element>(&self) -> CnnModel<U> {
        CnnModel {
            input_size: self.input_size,
            seed: self.seed,
            conv1_kernels: self.conv1_kernels.cast(),
            conv1_bias: self.conv1_bias.cast(),
            conv2_kernels: self.conv2_kernels.cast(),
            conv2_bias: self.conv2_bias.cast(),
            dense1_weights: self.dense1_weights.cast(),
            dense1_bias: self.dense1_bias.cast(),
            dense2_weights: self.dense2_weights.cast(),
            dense2_bias: self.dense2_bias.cast(),
        }
    }
}

/// Dropout behaviour for a forward pass.
#[derive(Clone, Copy, Debug)]
pub enum ForwardMode {
    /// Dropout disabled (identity); deterministic.
    Inference,
    /// Dropout active; the mask for sample `i` of this step comes from a
    /// substream keyed on (seed, step, i), so parallel samples never
    /// share RNG state.
    Training { dropout_rate: f64, seed: u64, step: u64 },
}

/// Everything the backward pass needs from one sample's forward pass.
struct SampleTrace<T: Element> {
    conv1_out: Tensor<T>,
    pool1_out: Tensor<T>,
    pool1_argmax: Vec<usize>,
    conv2_out: Tensor<T>,
    pool2_out: Tensor<T>,
    pool2_argmax: Vec<usize>,
    flat: Vec<T>,
    dense1_out: Vec<T>,
    dropped: Vec<T>,
    dropout_mask: Vec<bool>,
    probs: Vec<T>,
}

fn check_input_shape<T: Element>(model: &CnnModel<T>, input: &Tensor<T>) -> Result<()> {
    let (c, h, w) = model.input_size;
    if input.shape() != [c, h, w] {
        return Err(Error::ShapeMismatch(format!(
            "input shape {:?} does not match model input [{c}, {h}, {w}]",
            input.shape()
        )));
    }
    Ok(())
}

fn forward_sample<T: Element>(
    model: &CnnModel<T>,
    input: &Tensor<T>,
    dropout_cfg: Option<(f64, rand_chacha::ChaCha8Rng)>,
) -> Result<SampleTrace<T>> {
    check_input_shape(model, input)?;
    let conv1_out = conv2d(input, &model.conv1_kernels, model.conv1_bias.data(), Padding::Same)?;
    let relu1 = relu(&conv1_out);
    let pool1 = maxpool2d(&relu1)?;
    let conv2_out = conv2d(
        &pool1.output,
        &model.conv2_kernels,
        model.conv2_bias.data(),
        Padding::Same,
    )?;
    let relu2 = relu(&conv2_out);
    let pool2 = maxpool2d(&relu2)?;
    let flat = pool2.output.data().to_vec();
    let dense1_out = dense(&flat, &model.dense1_weights, model.dense1_bias.data())?;
    let relu_d1 = dense1_out
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect::<Vec<T>>();

    let (dropped, dropout_mask) = match dropout_cfg {
        Some((rate, mut rng)) => {
            let len = relu_d1.len();
            let t = Tensor::from_vec(&[len], relu_d1)?;
            let out = dropout(&t, rate, &mut rng, true)?;
            (out.output.into_data(), out.mask)
        }
        None => (relu_d1, Vec::new()),
    };

    let logits = dense(&dropped, &model.dense2_weights, model.dense2_bias.data())?;
    let probs = softmax(&logits);
    Ok(SampleTrace {
        conv1_out,
        pool1_out: pool1.output,
        pool1_argmax: pool1.argmax,
        conv2_out,
        pool2_out: pool2.output,
        pool2_argmax: pool2.argmax,
        flat,
        dense1_out,
        dropped,
        dropout_mask,
        probs,
    })
}

/// Per-parameter gradients in [`PARAM_NAMES`] order, plus the sample loss.
struct SampleGrads<T: Element> {
    tensors: Vec<Tensor<T>>,
    loss: T,
}

fn backward_sample<T: Element>(
    model: &CnnModel<T>,
    input: &Tensor<T>,
    trace: &SampleTrace<T>,
    true_class: usize,
    dropout_rate: f64,
) -> Result<SampleGrads<T>> {
    let loss = cross_entropy(&trace.probs, true_class)?;
    let d_logits = softmax_cross_entropy_backward(&trace.probs, true_class)?;

    let g2 = dense_backward(&trace.dropped, &model.dense2_weights, &d_logits)?;
    let d_dropped = {
        let len = g2.input.len();
        Tensor::from_vec(&[len], g2.input)?
    };
    let d_relu_d1 = dropout_backward(&d_dropped, &trace.dropout_mask, dropout_rate)?;
    // Gate through the dense1 ReLU.
    let d_dense1_out: Vec<T> = trace
        .dense1_out
        .iter()
        .zip(d_relu_d1.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    let g1 = dense_backward(&trace.flat, &model.dense1_weights, &d_dense1_out)?;
    let d_pool2 = Tensor::from_vec(trace.pool2_out.shape(), g1.input)?;

    let d_relu2 = maxpool2d_backward(trace.conv2_out.shape(), &trace.pool2_argmax, &d_pool2)?;
    let d_conv2_out = relu_backward(&trace.conv2_out, &d_relu2)?;
    let gc2 = conv2d_backward(
        &trace.pool1_out,
        &model.conv2_kernels,
        &d_conv2_out,
        Padding::Same,
    )?;

    let d_relu1 = maxpool2d_backward(trace.conv1_out.shape(), &trace.pool1_argmax, &gc2.input)?;
    let d_conv1_out = relu_backward(&trace.conv1_out, &d_relu1)?;
    let gc1 = conv2d_backward(input, &model.conv1_kernels, &d_conv1_out, Padding::Same)?;

    let b1 = gc1.bias.len();
    let b2 = gc2.bias.len();
    let d1b = g1.bias.len();
    let d2b = g2.bias.len();
    Ok(SampleGrads {
        tensors: vec![
            gc1.kernels,
            Tensor::from_vec(&[b1], gc1.bias)?,
            gc2.kernels,
            Tensor::from_vec(&[b2], gc2.bias)?,
            g1.weights,
            Tensor::from_vec(&[d1b], g1.bias)?,
            g2.weights,
            Tensor::from_vec(&[d2b], g2.bias)?,
        ],
        loss,
    })
}

/// Forward a batch of `[C, H, W]` images; returns `[B, 2]` softmax rows.
pub fn forward<T: Element>(
    model: &CnnModel<T>,
    batch: &[Tensor<T>],
    mode: ForwardMode,
) -> Result<Tensor<T>> {
    let probs: Vec<Vec<T>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            let dropout_cfg = match mode {
                ForwardMode::Inference => None,
                ForwardMode::Training {
                    dropout_rate,
                    seed,
                    step,
                } => Some((dropout_rate, substream_at(seed, "dropout", &[step, i as u64]))),
            };
            forward_sample(model, input, dropout_cfg).map(|t| t.probs)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(batch.len() * N_CLASSES);
    for row in probs {
        data.extend(row);
    }
    Tensor::from_vec(&[batch.len(), N_CLASSES], data)
}

/// Parameter gradients in [`PARAM_NAMES`] order + loss sum + correct
/// count, for one chunk of samples.
type GradAccum<T> = (Vec<Tensor<T>>, T, usize);

/// Mean loss and summed parameter gradients over a batch, accumulated in
/// fixed sample order (parallel over fixed-size chunks).
fn batch_gradients<T: Element>(
    model: &CnnModel<T>,
    images: &[Tensor<T>],
    labels: &[u8],
    dropout_cfg: Option<(f64, u64, u64)>, // (rate, seed, step)
) -> Result<GradAccum<T>> {
    debug_assert_eq!(images.len(), labels.len());
    let indexed: Vec<usize> = (0..images.len()).collect();
    let chunk_results: Vec<Result<GradAccum<T>>> = indexed
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc: Option<Vec<Tensor<T>>> = None;
            let mut loss_sum = T::zero();
            let mut correct = 0usize;
            for &i in chunk {
                let dropout_rng = dropout_cfg.map(|(rate, seed, step)| {
                    (rate, substream_at(seed, "dropout", &[step, i as u64]))
                });
                let trace = forward_sample(model, &images[i], dropout_rng)?;
                if predict_class(trace.probs[1].as_f64()) == labels[i] {
                    correct += 1;
                }
                let rate = dropout_cfg.map(|(r, _, _)| r).unwrap_or(0.0);
                let g = backward_sample(model, &images[i], &trace, labels[i] as usize, rate)?;
                loss_sum += g.loss;
                match &mut acc {
                    None => acc = Some(g.tensors),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g.tensors) {
                            a.add_assign(b)?;
                        }
                    }
                }
            }
            Ok((acc.expect("non-empty chunk"), loss_sum, correct))
        })
        .collect();

    let mut total: Option<Vec<Tensor<T>>> = None;
    let mut loss_sum = T::zero();
    let mut correct = 0usize;
    for r in chunk_results {
        let (tensors, loss, c) = r?;
        loss_sum += loss;
        correct += c;
        match &mut total {
            None => total = Some(tensors),
            Some(total) => {
                for (a, b) in total.iter_mut().zip(&tensors) {
                    a.add_assign(b)?;
                }
            }
        }
    }
    let mut grads = total.ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let scale = T::from_f64(1.0 / images.len() as f64);
    for g in &mut grads {
        g.scale(scale);
    }
    Ok((grads, loss_sum * scale, correct))
}

/// Train on one attribute's images/labels. Labels are class indices
/// (0/1). Returns the trained model and one history row per epoch.
pub fn train<T: Element>(
    mut model: CnnModel<T>,
    train_images: &[Tensor<T>],
    train_labels: &[u8],
    test: Option<(&[Tensor<T>], &[u8])>,
    config: &TrainConfig,
) -> Result<(CnnModel<T>, History)> {
    config.validate()?;
    if train_images.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if train_images.len() != train_labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} training images vs {} labels",
            train_images.len(),
            train_labels.len()
        )));
    }
    if train_labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be class indices 0/1".into()));
    }

    let hyper = SgdHyper {
        learning_rate: config.learning_rate,
        momentum: config.momentum,
    };
    let mut velocity: Vec<Tensor<T>> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step: u64 = 0;

    for epoch in 0..config.epochs {
        // Per-epoch shuffle from its own substream: reproducible and
        // independent of dropout draws.
        let mut order: Vec<usize> = (0..train_images.len()).collect();
        crate::rng::shuffle(&mut order, &mut substream_at(config.seed, "shuffle", &[epoch as u64]));

        let mut epoch_loss = 0.0f64;
        let mut epoch_correct = 0usize;
        let mut n_batches = 0usize;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let images: Vec<Tensor<T>> = batch.iter().map(|&i| train_images[i].clone()).collect();
            let labels: Vec<u8> = batch.iter().map(|&i| train_labels[i]).collect();
            let (grads, loss, correct) = batch_gradients(
                &model,
                &images,
                &labels,
                Some((config.dropout_rate, config.seed, step)),
            )?;
            if !loss.as_f64().is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: batch_idx + 1,
                });
            }
            for (param, (grad, vel)) in model
                .params_mut()
                .into_iter()
                .zip(grads.iter().zip(velocity.iter_mut()))
            {
                sgd_step(param, grad, vel, hyper)?;
            }
            epoch_loss += loss.as_f64();
            epoch_correct += correct;
            n_batches += 1;
            step += 1;
        }

        let test_accuracy = match test {
            Some((images, labels)) if (epoch + 1) % config.eval_every == 0 => {
                Some(accuracy(&model, images, labels)?)
            }
            _ => None,
        };
        history.push(EpochStats {
            epoch: epoch + 1,
            loss: epoch_loss / n_batches as f64,
            train_accuracy: epoch_correct as f64 / train_images.len() as f64,
            test_accuracy,
        });
    }
    Ok((model, history))
}

/// Fraction of correct argmax predictions (inference mode).
pub fn accuracy<T: Element>(
    model: &CnnModel<T>,
    images: &[Tensor<T>],
    labels: &[u8],
) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let probs = forward(model, images, ForwardMode::Inference)?;
    let correct = probs
        .data()
        .chunks_exact(N_CLASSES)
        .zip(labels)
        .filter(|(row, &label)| predict_class(row[1].as_f64()) == label)
        .count();
    Ok(correct as f64 / images.len() as f64)
}

/// Full evaluation with per-image records for the audit analyses.
pub fn evaluate<T: Element>(
    model: &CnnModel<T>,
    images: &[Tensor<T>],
    labels: &[u8],
    ids: &[String],
) -> Result<EvalOutcome> {
    if images.len() != labels.len() || images.len() != ids.len() {
        return Err(Error::ShapeMismatch(format!(
            "evaluate: {} images, {} labels, {} ids",
            images.len(),
            labels.len(),
            ids.len()
        )));
    }
    if images.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let probs = forward(model, images, ForwardMode::Inference)?;
    let records = probs
        .data()
        .chunks_exact(N_CLASSES)
        .enumerate()
        .map(|(i, row)| {
            let p = row[1].as_f64();
            EvalRecord {
                image_id: ids[i].clone(),
                true_label: labels[i],
                predicted: predict_class(p),
                prob_positive: p,
            }
        })
        .collect();
    EvalOutcome::from_records(records)
}

/// Network-level finite-difference check: mean cross-entropy loss over
/// `images` (dropout off), analytic gradients vs central differences on
/// up to `coords_per_tensor` sampled coordinates of every parameter.
/// Returns the maximum relative error. `f64` only.
pub fn gradient_check_network(
    model: &CnnModel<f64>,
    images: &[Tensor<f64>],
    labels: &[u8],
    epsilon: f64,
    coords_per_tensor: usize,
    seed: u64,
) -> Result<f64> {
    let loss_of = |m: &CnnModel<f64>| -> Result<f64> {
        let probs = forward(m, images, ForwardMode::Inference)?;
        let mut total = 0.0;
        for (row, &label) in probs.data().chunks_exact(N_CLASSES).zip(labels) {
            total += cross_entropy(row, label as usize)?;
        }
        Ok(total / images.len() as f64)
    };

    let (grads, _, _) = batch_gradients(model, images, labels, None)?;
    let mut rng = substream(seed, "netcheck");
    let mut max_rel: f64 = 0.0;
    let mut probe = model.clone();
    for (t, grad) in grads.iter().enumerate() {
        let len = grad.len();
        let coords: Vec<usize> = if len <= coords_per_tensor {
            (0..len).collect()
        } else {
            (0..coords_per_tensor)
                .map(|_| rand::Rng::gen_range(&mut rng, 0..len))
                .collect()
        };
        for &c in &coords {
            let orig = probe.params()[t].data()[c];
            probe.params_mut()[t].data_mut()[c] = orig + epsilon;
            let plus = loss_of(&probe)?;
            probe.params_mut()[t].data_mut()[c] = orig - epsilon;
            let minus = loss_of(&probe)?;
            probe.params_mut()[t].data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = grad.data()[c];
            max_rel = max_rel.max(crate::gradcheck::relative_error(numeric, analytic));
        }
    }
    Ok(max_rel)
}
