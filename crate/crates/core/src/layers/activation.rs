//! ReLU, softmax and cross-entropy.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Floor applied inside `ln` so a confidently wrong prediction yields a
/// large finite loss instead of infinity.
pub const PROB_FLOOR: f64 = 1e-12;

/// Elementwise `max(0, x)`: zero when x < 0, linear with slope 1 when x > 0.
pub fn relu<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes the upstream gradient where the input was strictly positive.
/// The subgradient at exactly zero is taken as zero.
pub fn relu_backward<T: Element>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu backward: input {:?} vs upstream {:?}",
            input.shape(),
            upstream.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Numerically stable softmax: `exp(x_i - max) / Σ exp(x_j - max)`.
/// Outputs lie in (0, 1] and sum to 1.
pub fn softmax<T: Element>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().cloned().sum();
    exps.into_iter().map(|v| v / total).collect()
}

/// Negative log-likelihood of the true class, with [`PROB_FLOOR`].
pub fn cross_entropy<T: Element>(probs: &[T], true_class: usize) -> Result<T> {
    if true_class >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "class index {} out of range for {} classes",
            true_class,
            probs.len()
        )));
    }
    let floor = T::from_f64(PROB_FLOOR);
    let p = probs[true_class];
    if p.is_nan() {
        // Propagate so training's divergence detector can see it.
        return Ok(p);
    }
    let p = if p > floor { p } else { floor };
    Ok(-p.ln())
}

/// Gradient of `cross_entropy(softmax(logits), true_class)` with respect
/// to the logits: `probs - onehot(true_class)`.
pub fn softmax_cross_entropy_backward<T: Element>(
    probs: &[T],
    true_class: usize,
) -> Result<Vec<T>> {
    if true_class >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "class index {} out of range for {} classes",
            true_class,
            probs.len()
        )));
    }
    let mut grad = probs.to_vec();
    grad[true_class] -= T::one();
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let input = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&input).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_is_identity_on_nonnegative_input() {
        let input = Tensor::from_vec(&[4], vec![0.0, 0.5, 1.0, 7.0]).unwrap();
        assert_eq!(relu(&input).data(), input.data());
    }

    #[test]
    fn relu_gradient_gates_on_sign() {
        let input = Tensor::from_vec(&[2], vec![-1.0, 2.0]).unwrap();
        let upstream = Tensor::from_vec(&[2], vec![5.0, 7.0]).unwrap();
        let grad = relu_backward(&input, &upstream).unwrap();
        assert_eq!(grad.data(), &[0.0, 7.0]);
    }

    #[test]
    fn relu_gradient_is_zero_at_exactly_zero() {
        let input = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let upstream = Tensor::from_vec(&[1], vec![3.0]).unwrap();
        assert_eq!(relu_backward(&input, &upstream).unwrap().data(), &[0.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let probs = softmax(&[0.0f64, 0.0]);
        assert!((probs[0] - 0.5).abs() < 1e-15);
        assert!((probs[1] - 0.5).abs() < 1e-15);

        for c in [-100.0f64, 0.0, 3.0, 250.0] {
            let probs = softmax(&[c, c, c]);
            for p in probs {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_matches_direct_formula() {
        // Oracle: evaluate the normalized exponentials directly.
        let logits = [1.0f64, 2.0, 3.0];
        let z: f64 = logits.iter().map(|v| v.exp()).sum();
        let expected: Vec<f64> = logits.iter().map(|v| v.exp() / z).collect();
        let got = softmax(&logits);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "got {g}, expected {e}");
        }
        let sum: f64 = got.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_extreme_logits() {
        let probs = softmax(&[1000.0f64, -1000.0]);
        assert!(probs.iter().all(|p| p.is_finite()));
        assert!((probs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_of_onehot_is_zero() {
        let loss = cross_entropy(&[0.0f64, 1.0], 1).unwrap();
        assert!(loss.abs() < 1e-10);
    }

    #[test]
    fn cross_entropy_of_uniform_two_class_is_ln_two() {
        let loss = cross_entropy(&[0.5f64, 0.5], 0).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_class() {
        assert!(cross_entropy(&[0.5f64, 0.5], 2).is_err());
    }

    #[test]
    fn cross_entropy_is_finite_on_zero_probability() {
        let loss = cross_entropy(&[1.0f64, 0.0], 1).unwrap();
        assert!(loss.is_finite());
        assert!((loss - -(PROB_FLOOR.ln())).abs() < 1e-6);
    }

    #[test]
    fn combined_backward_is_probs_minus_onehot() {
        let probs = softmax(&[0.3f64, -0.2, 1.7]);
        let grad = softmax_cross_entropy_backward(&probs, 2).unwrap();
        assert!((grad[0] - probs[0]).abs() < 1e-15);
        assert!((grad[1] - probs[1]).abs() < 1e-15);
        assert!((grad[2] - (probs[2] - 1.0)).abs() < 1e-15);
    }
}
