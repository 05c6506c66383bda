//! Inverted dropout.
//!
//! In training mode each element is zeroed independently with probability
//! `rate` and survivors are scaled by `1 / (1 - rate)`, so inference is
//! exactly the identity.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub struct DropoutOutput<T: Element> {
    pub output: Tensor<T>,
    /// Per-element keep mask; empty in inference mode.
    pub mask: Vec<bool>,
}

pub fn dropout<T: Element>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut impl Rng,
    training: bool,
) -> Result<DropoutOutput<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok(DropoutOutput {
            output: input.clone(),
            mask: Vec::new(),
        });
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let mut mask = Vec::with_capacity(input.len());
    let data = input
        .data()
        .iter()
        .map(|&v| {
            let keep = rng.gen::<f64>() >= rate;
            mask.push(keep);
            if keep {
                v * scale
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(DropoutOutput {
        output: Tensor::from_vec(input.shape(), data)?,
        mask,
    })
}

/// Backward pass reusing the forward mask. An empty mask (inference or
/// rate 0) transports the upstream gradient unchanged.
pub fn dropout_backward<T: Element>(
    upstream: &Tensor<T>,
    mask: &[bool],
    rate: f64,
) -> Result<Tensor<T>> {
    if mask.is_empty() {
        return Ok(upstream.clone());
    }
    if mask.len() != upstream.len() {
        return Err(Error::ShapeMismatch(format!(
            "dropout mask length {} vs upstream {}",
            mask.len(),
            upstream.len()
        )));
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let data = upstream
        .data()
        .iter()
        .zip(mask)
        .map(|(&g, &keep)| if keep { g * scale } else { T::zero() })
        .collect();
    Tensor::from_vec(upstream.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn rate_zero_is_identity_in_both_modes() {
        let input = Tensor::from_vec(&[4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut rng = substream(1, "dropout");
        for training in [false, true] {
            let out = dropout(&input, 0.0, &mut rng, training).unwrap();
            assert_eq!(out.output.data(), input.data());
        }
    }

    #[test]
    fn inference_is_exactly_identity() {
        let input = Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap();
        let mut rng = substream(2, "dropout");
        let out = dropout(&input, 0.9, &mut rng, false).unwrap();
        assert_eq!(out.output.data(), input.data());
        assert!(out.mask.is_empty());
    }

    #[test]
    fn rate_one_rejected() {
        let input = Tensor::<f64>::zeros(&[2]);
        let mut rng = substream(3, "dropout");
        assert!(dropout(&input, 1.0, &mut rng, true).is_err());
        assert!(dropout(&input, -0.1, &mut rng, true).is_err());
    }

    #[test]
    fn survivor_mean_is_preserved_at_scale() {
        // Law of large numbers: inverted scaling keeps the mean near 1.
        let n = 100_000;
        let input = Tensor::filled(&[n], 1.0f64);
        let mut rng = substream(42, "dropout");
        let out = dropout(&input, 0.5, &mut rng, true).unwrap();
        let mean: f64 = out.output.data().iter().sum::<f64>() / n as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let input = Tensor::from_vec(&[64], (0..64).map(|i| i as f64).collect()).unwrap();
        let a = dropout(&input, 0.5, &mut substream(7, "dropout"), true).unwrap();
        let b = dropout(&input, 0.5, &mut substream(7, "dropout"), true).unwrap();
        assert_eq!(a.output.data(), b.output.data());
        assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn backward_reuses_mask_and_scale() {
        let input = Tensor::from_vec(&[6], vec![1.0; 6]).unwrap();
        let out = dropout(&input, 0.5, &mut substream(9, "dropout"), true).unwrap();
        let upstream = Tensor::from_vec(&[6], vec![3.0; 6]).unwrap();
        let grad = dropout_backward(&upstream, &out.mask, 0.5).unwrap();
        for (g, &keep) in grad.data().iter().zip(&out.mask) {
            assert_eq!(*g, if keep { 6.0 } else { 0.0 });
        }
    }
}
