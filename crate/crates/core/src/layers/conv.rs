//! 2-D convolution at stride 1, with hand-derived gradients.
//!
//! The filter slides over the image; each output pixel is the sum of the
//! elementwise products between the filter and the pixels it overlaps,
//! plus a per-output-channel bias.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad so the output keeps the input's spatial extent.
    Same,
    /// No padding; output shrinks by `k - 1`.
    Valid,
}

/// Gradients of a convolution with respect to its parameters and input.
pub struct ConvGradients<T: Element> {
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
    pub input: Tensor<T>,
}

fn check_conv_shapes<T: Element>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &[T],
    padding: Padding,
) -> Result<(usize, usize, usize, usize, usize, usize, usize)> {
    let (c_in, h, w) = input.dims3()?;
    let (c_out, kc, kh, kw) = match kernels.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "kernels must be [C_out, C_in, k, k], got {:?}",
                kernels.shape()
            )))
        }
    };
    if kc != c_in {
        return Err(Error::ShapeMismatch(format!(
            "kernel input channels ({kc}) do not match input channels ({c_in})"
        )));
    }
    if kh != kw {
        return Err(Error::InvalidArgument(format!(
            "kernels must be square, got {kh}x{kw}"
        )));
    }
    if kh % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd, got {kh}"
        )));
    }
    if bias.len() != c_out {
        return Err(Error::ShapeMismatch(format!(
            "bias length {} does not match output channels {}",
            bias.len(),
            c_out
        )));
    }
    if padding == Padding::Valid && (kh > h || kw > w) {
        return Err(Error::ShapeMismatch(format!(
            "valid padding needs kernel ({kh}) to fit inside input ({h}x{w})"
        )));
    }
    let (oh, ow) = match padding {
        Padding::Same => (h, w),
        Padding::Valid => (h - kh + 1, w - kw + 1),
    };
    Ok((c_in, h, w, c_out, kh, oh, ow))
}

/// Convolve `input [C_in, H, W]` with `kernels [C_out, C_in, k, k]`.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &[T],
    padding: Padding,
) -> Result<Tensor<T>> {
    let (c_in, h, w, c_out, k, oh, ow) = check_conv_shapes(input, kernels, bias, padding)?;
    let pad = match padding {
        Padding::Same => k / 2,
        Padding::Valid => 0,
    };

    let x = input.data();
    let kd = kernels.data();
    let mut out = Tensor::zeros(&[c_out, oh, ow]);
    let od = out.data_mut();

    // Kernel-coefficient-stationary loop order: each (c, i, j) streams a
    // shifted input row into the output row, which vectorizes. Per output
    // pixel the contributions still accumulate in (c, i, j) order after
    // the bias, exactly as a direct per-pixel summation would.
    for o in 0..c_out {
        let out_plane = &mut od[o * oh * ow..(o + 1) * oh * ow];
        out_plane.fill(bias[o]);
        for c in 0..c_in {
            let x_plane = &x[c * h * w..(c + 1) * h * w];
            let k_base = (o * c_in + c) * k * k;
            for i in 0..k {
                // Output rows whose source row y + i - pad is in range.
                let y_lo = pad.saturating_sub(i);
                let y_hi = oh.min(h + pad - i);
                for j in 0..k {
                    let kv = kd[k_base + i * k + j];
                    let xo_lo = pad.saturating_sub(j);
                    let xo_hi = ow.min(w + pad - j);
                    if xo_lo >= xo_hi {
                        continue;
                    }
                    let span = xo_hi - xo_lo;
                    for y in y_lo..y_hi {
                        let src = (y + i - pad) * w + xo_lo + j - pad;
                        let dst = y * ow + xo_lo;
                        let x_row = &x_plane[src..src + span];
                        let o_row = &mut out_plane[dst..dst + span];
                        for (ov, xv) in o_row.iter_mut().zip(x_row) {
                            *ov += kv * *xv;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] given the upstream gradient of its output.
pub fn conv2d_backward<T: Element>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    upstream: &Tensor<T>,
    padding: Padding,
) -> Result<ConvGradients<T>> {
    let c_out_bias = kernels.shape()[0];
    let zero_bias = vec![T::zero(); c_out_bias];
    let (c_in, h, w, c_out, k, oh, ow) = check_conv_shapes(input, kernels, &zero_bias, padding)?;
    if upstream.shape() != [c_out, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient shape {:?} does not match conv output [{}, {}, {}]",
            upstream.shape(),
            c_out,
            oh,
            ow
        )));
    }
    let pad = match padding {
        Padding::Same => k / 2,
        Padding::Valid => 0,
    };

    let x = input.data();
    let kd = kernels.data();
    let up = upstream.data();
    let mut dk = Tensor::zeros(kernels.shape());
    let mut db = vec![T::zero(); c_out];
    let mut dx = Tensor::zeros(input.shape());
    let dkd = dk.data_mut();
    let dxd = dx.data_mut();

    for o in 0..c_out {
        let up_plane = &up[o * oh * ow..(o + 1) * oh * ow];
        for &g in up_plane {
            db[o] += g;
        }
        for c in 0..c_in {
            let x_plane = &x[c * h * w..(c + 1) * h * w];
            let dx_plane = &mut dxd[c * h * w..(c + 1) * h * w];
            let k_base = (o * c_in + c) * k * k;
            for i in 0..k {
                let y_lo = pad.saturating_sub(i);
                let y_hi = oh.min(h + pad - i);
                for j in 0..k {
                    let kv = kd[k_base + i * k + j];
                    let xo_lo = pad.saturating_sub(j);
                    let xo_hi = ow.min(w + pad - j);
                    if xo_lo >= xo_hi {
                        continue;
                    }
                    let span = xo_hi - xo_lo;
                    let mut dk_acc = T::zero();
                    for y in y_lo..y_hi {
                        let src = (y + i - pad) * w + xo_lo + j - pad;
                        let dst = y * ow + xo_lo;
                        let up_row = &up_plane[dst..dst + span];
                        let x_row = &x_plane[src..src + span];
                        let dx_row = &mut dx_plane[src..src + span];
                        let mut row_sum = T::zero();
                        for ((dxv, uv), xv) in dx_row.iter_mut().zip(up_row).zip(x_row) {
                            row_sum += *uv * *xv;
                            *dxv += kv * *uv;
                        }
                        dk_acc += row_sum;
                    }
                    dkd[k_base + i * k + j] = dk_acc;
                }
            }
        }
    }
    Ok(ConvGradients {
        kernels: dk,
        bias: db,
        input: dx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let input = tensor(&[1, 3, 3], (1..=9).map(f64::from).collect());
        let mut kernel = vec![0.0; 9];
        kernel[4] = 1.0; // center
        let kernels = tensor(&[1, 1, 3, 3], kernel);
        let out = conv2d(&input, &kernels, &[0.0], Padding::Same).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn zero_kernel_annihilates() {
        let input = tensor(&[2, 4, 4], (0..32).map(f64::from).collect());
        let kernels = Tensor::zeros(&[3, 2, 3, 3]);
        let out = conv2d(&input, &kernels, &[0.0; 3], Padding::Same).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.shape(), &[3, 4, 4]);
    }

    // Independent oracle: direct triple-loop summation over the window,
    // written without the clipped-range trick used by the implementation.
    fn direct_valid_conv(input: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Vec<f64> {
        let oh = h - k + 1;
        let ow = w - k + 1;
        let mut out = vec![0.0; oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                let mut sum = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        sum += input[(y + i) * w + (x + j)] * kernel[i * k + j];
                    }
                }
                out[y * ow + x] = sum;
            }
        }
        out
    }

    #[test]
    fn valid_conv_matches_direct_summation_oracle() {
        let data: Vec<f64> = (1..=16).map(f64::from).collect();
        let input = tensor(&[1, 4, 4], data.clone());
        let kernels = tensor(&[1, 1, 3, 3], vec![1.0; 9]);
        let out = conv2d(&input, &kernels, &[0.0], Padding::Valid).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        let expected = direct_valid_conv(&data, 4, 4, &[1.0; 9], 3);
        assert_eq!(out.data(), &expected[..]);
        // Frozen values from the oracle: windows of the 1..16 grid.
        assert_eq!(out.data(), &[54.0, 63.0, 90.0, 99.0]);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let input = Tensor::<f64>::zeros(&[3, 5, 5]);
        let kernels = Tensor::<f64>::zeros(&[4, 2, 3, 3]);
        let err = conv2d(&input, &kernels, &[0.0; 4], Padding::Same).unwrap_err();
        assert!(err.to_string().contains("channels"));
    }

    #[test]
    fn even_kernel_rejected() {
        let input = Tensor::<f64>::zeros(&[1, 5, 5]);
        let kernels = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        assert!(conv2d(&input, &kernels, &[0.0], Padding::Same).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let input = tensor(&[1, 4, 4], (0..16).map(f64::from).collect());
        let kernels = tensor(&[2, 1, 3, 3], (0..18).map(|i| i as f64 * 0.1).collect());
        let upstream = Tensor::zeros(&[2, 4, 4]);
        let g = conv2d_backward(&input, &kernels, &upstream, Padding::Same).unwrap();
        assert!(g.kernels.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
        assert!(g.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_transports_upstream() {
        let input = tensor(&[1, 3, 3], (1..=9).map(f64::from).collect());
        let mut kernel = vec![0.0; 9];
        kernel[4] = 1.0;
        let kernels = tensor(&[1, 1, 3, 3], kernel);
        let upstream = tensor(&[1, 3, 3], (10..19).map(f64::from).collect());
        let g = conv2d_backward(&input, &kernels, &upstream, Padding::Same).unwrap();
        assert_eq!(g.input.data(), upstream.data());
    }

    #[test]
    fn backward_rejects_wrong_upstream_shape() {
        let input = Tensor::<f64>::zeros(&[1, 4, 4]);
        let kernels = Tensor::<f64>::zeros(&[1, 1, 3, 3]);
        let upstream = Tensor::<f64>::zeros(&[1, 2, 2]);
        assert!(conv2d_backward(&input, &kernels, &upstream, Padding::Same).is_err());
    }
}
