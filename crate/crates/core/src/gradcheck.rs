//! Finite-difference verification of analytic gradients.
//!
//! Each layer is wrapped as a [`CheckLayer`]; the checker perturbs every
//! parameter and input coordinate by ±epsilon, compares the central
//! difference of a scalarized loss against the layer's backward pass, and
//! returns the worst relative error. All checking runs at `f64`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{
    conv2d, conv2d_backward, cross_entropy, dense, dense_backward, dropout, dropout_backward,
    maxpool2d, maxpool2d_backward, relu, relu_backward, softmax, softmax_cross_entropy_backward,
    Padding,
};
use crate::rng::substream;
use crate::tensor::Tensor;

/// Perturbation step used throughout the crate's gradient checks.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// A single differentiable operation under check, carrying its own
/// parameters. The checker differentiates with respect to the parameters
/// and the input.
#[derive(Clone)]
pub enum CheckLayer {
    Dense {
        weights: Tensor<f64>,
        bias: Vec<f64>,
    },
    Conv {
        kernels: Tensor<f64>,
        bias: Vec<f64>,
        padding: Padding,
    },
    Relu,
    MaxPool,
    /// Softmax head followed by cross-entropy against `true_class`;
    /// the layer output is the scalar loss.
    SoftmaxCrossEntropy { true_class: usize },
    /// Dropout with the mask replayed from `seed`, so the mask is fixed
    /// while coordinates are perturbed.
    Dropout { rate: f64, seed: u64 },
}

fn forward(layer: &CheckLayer, input: &Tensor<f64>) -> Result<Tensor<f64>> {
    match layer {
        CheckLayer::Dense { weights, bias } => {
            let out = dense(input.data(), weights, bias)?;
            let len = out.len();
            Tensor::from_vec(&[len], out)
        }
        CheckLayer::Conv {
            kernels,
            bias,
            padding,
        } => conv2d(input, kernels, bias, *padding),
        CheckLayer::Relu => Ok(relu(input)),
        CheckLayer::MaxPool => Ok(maxpool2d(input)?.output),
        CheckLayer::SoftmaxCrossEntropy { true_class } => {
            let probs = softmax(input.data());
            let loss = cross_entropy(&probs, *true_class)?;
            Tensor::from_vec(&[1], vec![loss])
        }
        CheckLayer::Dropout { rate, seed } => {
            let mut rng = substream(*seed, "gradcheck-dropout");
            Ok(dropout(input, *rate, &mut rng, true)?.output)
        }
    }
}

/// Analytic gradients: one tensor per parameter (layer-defined order),
/// then the input gradient.
fn backward(
    layer: &CheckLayer,
    input: &Tensor<f64>,
    upstream: &Tensor<f64>,
) -> Result<(Vec<Tensor<f64>>, Tensor<f64>)> {
    match layer {
        CheckLayer::Dense { weights, .. } => {
            let g = dense_backward(input.data(), weights, upstream.data())?;
            let bias_len = g.bias.len();
            let input_len = g.input.len();
            Ok((
                vec![g.weights, Tensor::from_vec(&[bias_len], g.bias)?],
                Tensor::from_vec(&[input_len], g.input)?,
            ))
        }
        CheckLayer::Conv {
            kernels, padding, ..
        } => {
            let g = conv2d_backward(input, kernels, upstream, *padding)?;
            let bias_len = g.bias.len();
            Ok((
                vec![g.kernels, Tensor::from_vec(&[bias_len], g.bias)?],
                g.input,
            ))
        }
        CheckLayer::Relu => Ok((Vec::new(), relu_backward(input, upstream)?)),
        CheckLayer::MaxPool => {
            let pooled = maxpool2d(input)?;
            Ok((
                Vec::new(),
                maxpool2d_backward(input.shape(), &pooled.argmax, upstream)?,
            ))
        }
        CheckLayer::SoftmaxCrossEntropy { true_class } => {
            let probs = softmax(input.data());
            let mut grad = softmax_cross_entropy_backward(&probs, *true_class)?;
            let c = upstream.data()[0];
            for g in &mut grad {
                *g *= c;
            }
            let len = grad.len();
            Ok((Vec::new(), Tensor::from_vec(&[len], grad)?))
        }
        CheckLayer::Dropout { rate, seed } => {
            let mut rng = substream(*seed, "gradcheck-dropout");
            let fwd = dropout(input, *rate, &mut rng, true)?;
            Ok((Vec::new(), dropout_backward(upstream, &fwd.mask, *rate)?))
        }
    }
}

/// Mutable views of every differentiable coordinate: parameters first,
/// input last. Order matches [`backward`]'s gradient order.
fn coord_slices<'a>(
    layer: &'a mut CheckLayer,
    input: &'a mut Tensor<f64>,
) -> Vec<&'a mut [f64]> {
    let mut slices: Vec<&mut [f64]> = Vec::new();
    match layer {
        CheckLayer::Dense { weights, bias } => {
            slices.push(weights.data_mut());
            slices.push(bias.as_mut_slice());
        }
        CheckLayer::Conv { kernels, bias, .. } => {
            slices.push(kernels.data_mut());
            slices.push(bias.as_mut_slice());
        }
        _ => {}
    }
    slices.push(input.data_mut());
    slices
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compare the layer's analytic gradients against central finite
/// differences of a scalarized loss, returning the maximum relative
/// error over all parameter and input coordinates.
pub fn finite_difference_check(
    layer: &CheckLayer,
    input: &Tensor<f64>,
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let base = forward(layer, input)?;

    // Scalarize with a fixed random linear functional so every output
    // coordinate contributes to the checked loss.
    let mut coeff_rng = substream(0x5eed, "gradcheck-coeffs");
    let coeffs: Vec<f64> = (0..base.len())
        .map(|_| coeff_rng.gen_range(0.5..1.5))
        .collect();
    let upstream = Tensor::from_vec(base.shape(), coeffs.clone())?;

    let (param_grads, input_grad) = backward(layer, input, &upstream)?;
    let mut analytic: Vec<f64> = Vec::new();
    for g in &param_grads {
        analytic.extend_from_slice(g.data());
    }
    analytic.extend_from_slice(input_grad.data());

    let loss = |layer: &CheckLayer, input: &Tensor<f64>| -> Result<f64> {
        let out = forward(layer, input)?;
        Ok(out
            .data()
            .iter()
            .zip(&coeffs)
            .map(|(&o, &c)| o * c)
            .sum())
    };

    let mut layer = layer.clone();
    let mut input = input.clone();
    let mut max_rel: f64 = 0.0;
    let mut flat = 0usize;
    let n_slices = coord_slices(&mut layer, &mut input).len();
    for s in 0..n_slices {
        let len = coord_slices(&mut layer, &mut input)[s].len();
        for i in 0..len {
            let orig = coord_slices(&mut layer, &mut input)[s][i];
            coord_slices(&mut layer, &mut input)[s][i] = orig + epsilon;
            let plus = loss(&layer, &input)?;
            coord_slices(&mut layer, &mut input)[s][i] = orig - epsilon;
            let minus = loss(&layer, &input)?;
            coord_slices(&mut layer, &mut input)[s][i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            max_rel = max_rel.max(relative_error(numeric, analytic[flat + i]));
        }
        flat += len;
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = substream(seed, "gradcheck-test");
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Random values bounded away from zero so ReLU kinks are not crossed.
    fn random_away_from_zero(shape: &[usize], seed: u64, margin: f64) -> Tensor<f64> {
        let mut rng = substream(seed, "gradcheck-test");
        Tensor::from_fn(shape, |_| {
            let v: f64 = rng.gen_range(margin..1.0);
            if rng.gen::<bool>() {
                v
            } else {
                -v
            }
        })
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let layer = CheckLayer::Dense {
            weights: random_tensor(&[3, 4], 1),
            bias: random_tensor(&[3], 2).into_data(),
        };
        let input = random_tensor(&[4], 3);
        let err = finite_difference_check(&layer, &input, DEFAULT_EPSILON).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        for padding in [Padding::Same, Padding::Valid] {
            let layer = CheckLayer::Conv {
                kernels: random_tensor(&[2, 1, 3, 3], 4),
                bias: random_tensor(&[2], 5).into_data(),
                padding,
            };
            let input = random_tensor(&[1, 5, 5], 6);
            let err = finite_difference_check(&layer, &input, DEFAULT_EPSILON).unwrap();
            assert!(err < 1e-4, "{padding:?}: max relative error {err}");
        }
    }

    #[test]
    fn conv_two_channel_six_by_six_case() {
        let layer = CheckLayer::Conv {
            kernels: random_tensor(&[2, 1, 3, 3], 7),
            bias: vec![0.1, -0.2],
            padding: Padding::Same,
        };
        let input = random_tensor(&[1, 6, 6], 8);
        let err = finite_difference_check(&layer, &input, DEFAULT_EPSILON).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn relu_gradient_away_from_kink_is_tight() {
        let input = random_away_from_zero(&[12], 9, 0.1);
        let err = finite_difference_check(&CheckLayer::Relu, &input, DEFAULT_EPSILON).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn maxpool_gradient_matches_when_windows_have_clear_maxima() {
        // Distinct values spaced well apart: no window ties to cross.
        let mut rng = substream(10, "gradcheck-test");
        let mut values: Vec<f64> = (0..36).map(|i| i as f64 * 0.05).collect();
        for i in (1..values.len()).rev() {
            let j = rng.gen_range(0..=i);
            values.swap(i, j);
        }
        let input = Tensor::from_vec(&[1, 6, 6], values).unwrap();
        let err = finite_difference_check(&CheckLayer::MaxPool, &input, DEFAULT_EPSILON).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn softmax_cross_entropy_gradient_matches() {
        let input = random_tensor(&[5], 11);
        let layer = CheckLayer::SoftmaxCrossEntropy { true_class: 2 };
        let err = finite_difference_check(&layer, &input, DEFAULT_EPSILON).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn dropout_gradient_matches_with_replayed_mask() {
        let input = random_tensor(&[20], 12);
        let layer = CheckLayer::Dropout {
            rate: 0.5,
            seed: 99,
        };
        let err = finite_difference_check(&layer, &input, DEFAULT_EPSILON).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn epsilon_must_be_positive() {
        let input = random_tensor(&[4], 13);
        assert!(finite_difference_check(&CheckLayer::Relu, &input, 0.0).is_err());
    }
}
