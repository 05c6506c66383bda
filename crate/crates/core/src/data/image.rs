//! Image loading: PNM natively, JPEG/PNG via the `image` crate, followed
//! by bilinear resize to the training resolution and scaling to [0, 1].

use std::path::Path;

use crate::data::pnm::{decode_pnm, RawImage};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A decoded, resized image: `pixels` is `[C, H, W]` with values in [0, 1].
#[derive(Clone, Debug)]
pub struct ImageRecord {
    pub image_id: String,
    pub pixels: Tensor<f32>,
}

/// Bilinear resample of one channel plane (half-pixel-center convention).
/// Exposed so tests can compare against an independent oracle.
pub fn bilinear_resize(
    src: &[f64],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w);
    assert!(dst_h > 0 && dst_w > 0);
    let scale_y = src_h as f64 / dst_h as f64;
    let scale_x = src_w as f64 / dst_w as f64;
    let mut dst = Vec::with_capacity(dst_h * dst_w);
    for y in 0..dst_h {
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for x in 0..dst_w {
            let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            let top = src[y0 * src_w + x0] * (1.0 - fx) + src[y0 * src_w + x1] * fx;
            let bottom = src[y1 * src_w + x0] * (1.0 - fx) + src[y1 * src_w + x1] * fx;
            dst.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    dst
}

fn raw_to_tensor(raw: &RawImage, target: (usize, usize)) -> Tensor<f32> {
    let (th, tw) = target;
    let c = raw.channels;
    let mut data = Vec::with_capacity(c * th * tw);
    let mut plane = vec![0.0f64; raw.height * raw.width];
    for ch in 0..c {
        for (i, v) in plane.iter_mut().enumerate() {
            *v = raw.samples[i * c + ch] as f64 / 255.0;
        }
        let resized = bilinear_resize(&plane, raw.height, raw.width, th, tw);
        data.extend(resized.into_iter().map(|v| v as f32));
    }
    Tensor::from_vec(&[c, th, tw], data).expect("resize output matches shape")
}

fn decode_with_image_crate(bytes: &[u8], path: &Path) -> Result<RawImage> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    Ok(RawImage {
        channels: 3,
        height: rgb.height() as usize,
        width: rgb.width() as usize,
        samples: rgb.into_raw(),
    })
}

/// Decode `path` (P5/P6, JPEG or PNG), resize to `(height, width)` and
/// scale to [0, 1]. The record id is the file name.
pub fn load_image(path: &Path, target: (usize, usize)) -> Result<ImageRecord> {
    if target.0 == 0 || target.1 == 0 {
        return Err(Error::InvalidArgument("target size must be positive".into()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes, path)?
    } else {
        decode_with_image_crate(&bytes, path)?
    };
    let image_id = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned());
    Ok(ImageRecord {
        image_id,
        pixels: raw_to_tensor(&raw, target),
    })
}

/// Load `ids` relative to `root` in parallel, reassembled in input order.
pub fn load_images(root: &Path, ids: &[String], target: (usize, usize)) -> Result<Vec<Tensor<f32>>> {
    use rayon::prelude::*;
    ids.par_iter()
        .map(|id| load_image(&root.join(id), target).map(|rec| rec.pixels))
        .collect()
}
