//! Fully connected (affine) layer: `y = W x + b`.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub struct DenseGradients<T: Element> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
    pub input: Vec<T>,
}

fn check_dense_shapes<T: Element>(
    input: &[T],
    weights: &Tensor<T>,
    bias_len: usize,
) -> Result<(usize, usize)> {
    let (m, n) = weights.dims2()?;
    if input.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "dense input length {} does not match weight columns {}",
            input.len(),
            n
        )));
    }
    if bias_len != m {
        return Err(Error::ShapeMismatch(format!(
            "dense bias length {bias_len} does not match weight rows {m}"
        )));
    }
    Ok((m, n))
}

pub fn dense<T: Element>(input: &[T], weights: &Tensor<T>, bias: &[T]) -> Result<Vec<T>> {
    let (m, n) = check_dense_shapes(input, weights, bias.len())?;
    let wd = weights.data();
    let mut out = Vec::with_capacity(m);
    for (row, &b) in wd.chunks_exact(n).zip(bias).take(m) {
        out.push(b + dot(row, input));
    }
    Ok(out)
}

/// Dot product with eight independent accumulator lanes, so the adds
/// pipeline instead of forming one long dependency chain.
fn dot<T: Element>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut a_chunks = a.chunks_exact(8);
    let mut b_chunks = b.chunks_exact(8);
    for (ac, bc) in (&mut a_chunks).zip(&mut b_chunks) {
        for l in 0..8 {
            lanes[l] += ac[l] * bc[l];
        }
    }
    let mut tail = T::zero();
    for (av, bv) in a_chunks.remainder().iter().zip(b_chunks.remainder()) {
        tail += *av * *bv;
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
        + tail
}

/// Gradients of [`dense`]: `dW = g ⊗ x`, `db = g`, `dx = Wᵀ g`.
pub fn dense_backward<T: Element>(
    input: &[T],
    weights: &Tensor<T>,
    upstream: &[T],
) -> Result<DenseGradients<T>> {
    let (m, n) = check_dense_shapes(input, weights, upstream.len())?;
    let wd = weights.data();
    let mut dw = Tensor::zeros(&[m, n]);
    let dwd = dw.data_mut();
    let mut dx = vec![T::zero(); n];
    for ((dw_row, w_row), &g) in dwd
        .chunks_exact_mut(n)
        .zip(wd.chunks_exact(n))
        .zip(upstream)
        .take(m)
    {
        for ((dw_v, dx_v), (w_v, x_v)) in dw_row
            .iter_mut()
            .zip(dx.iter_mut())
            .zip(w_row.iter().zip(input))
        {
            *dw_v = g * *x_v;
            *dx_v += g * *w_v;
        }
    }
    Ok(DenseGradients {
        weights: dw,
        bias: upstream.to_vec(),
        input: dx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let w = Tensor::from_vec(&[3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let out = dense(&[2.0, -3.0, 5.0], &w, &[0.0; 3]).unwrap();
        assert_eq!(out, vec![2.0, -3.0, 5.0]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let w = Tensor::<f64>::zeros(&[2, 3]);
        let out = dense(&[1.0, 2.0, 3.0], &w, &[3.0, 4.0]).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let w = Tensor::<f64>::zeros(&[2, 3]);
        assert!(dense(&[1.0, 2.0], &w, &[0.0; 2]).is_err());
        assert!(dense(&[1.0, 2.0, 3.0], &w, &[0.0; 3]).is_err());
    }

    #[test]
    fn backward_matches_hand_computed_case() {
        // W = [[1, 2], [3, 4]], x = [5, 6], g = [7, 8]
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = dense_backward(&[5.0, 6.0], &w, &[7.0, 8.0]).unwrap();
        assert_eq!(g.weights.data(), &[35.0, 42.0, 40.0, 48.0]);
        assert_eq!(g.bias, vec![7.0, 8.0]);
        // dx = Wᵀ g = [1*7 + 3*8, 2*7 + 4*8]
        assert_eq!(g.input, vec![31.0, 46.0]);
    }
}
