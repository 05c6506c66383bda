//! 2x2 max pooling at stride 2.
//!
//! Keeps the maximum of each window, halving the spatial extent. Odd
//! extents are padded by replicating the last row/column. The argmax
//! position of every window is recorded so the backward pass can route
//! the upstream gradient; ties go to the first position in row-major
//! window order.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub struct MaxPoolOutput<T: Element> {
    pub output: Tensor<T>,
    /// Flat index into the *input* buffer for each output cell's source.
    pub argmax: Vec<usize>,
}

pub fn maxpool2d<T: Element>(input: &Tensor<T>) -> Result<MaxPoolOutput<T>> {
    let (c, h, w) = input.dims3()?;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument(format!(
            "maxpool input must be non-empty, got shape {:?}",
            input.shape()
        )));
    }
    let oh = h.div_ceil(2);
    let ow = w.div_ceil(2);
    let x = input.data();
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let od = out.data_mut();

    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            // Replicate the last row when 2y+1 runs past the edge.
            let r0 = 2 * y;
            let r1 = (2 * y + 1).min(h - 1);
            for xo in 0..ow {
                let c0 = 2 * xo;
                let c1 = (2 * xo + 1).min(w - 1);
                let candidates = [
                    base + r0 * w + c0,
                    base + r0 * w + c1,
                    base + r1 * w + c0,
                    base + r1 * w + c1,
                ];
                let mut best = candidates[0];
                let mut best_val = x[best];
                for &idx in &candidates[1..] {
                    if x[idx] > best_val {
                        best = idx;
                        best_val = x[idx];
                    }
                }
                let o = (ch * oh + y) * ow + xo;
                od[o] = best_val;
                argmax[o] = best;
            }
        }
    }
    Ok(MaxPoolOutput {
        output: out,
        argmax,
    })
}

/// Route the upstream gradient back to the recorded argmax positions;
/// all other input cells receive zero.
pub fn maxpool2d_backward<T: Element>(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    if upstream.len() != argmax.len() {
        return Err(Error::ShapeMismatch(format!(
            "upstream has {} elements but {} argmax entries were recorded",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(input_shape);
    let gd = grad.data_mut();
    for (&src, &g) in argmax.iter().zip(upstream.data()) {
        gd[src] += g;
    }
    Ok(grad)
}
