//! Synthetic fixture data with known structure, used by the self-tests
//! and for smoke-testing the pipelines without a real dataset.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::pnm::{write_pgm, write_ppm};
use crate::data::{AttributeRecord, AttributeTable, EmbeddingTable};
use crate::error::Result;
use crate::rng::substream;
use crate::tensor::Tensor;

pub struct SyntheticImages {
    pub images: Vec<Tensor<f32>>,
    pub labels: Vec<u8>,
    pub ids: Vec<String>,
}

/// Balanced image set where class 1 contains a bright `square`-sided
/// patch at a random position over low noise: a visually salient,
/// trivially learnable feature.
pub fn bright_square_dataset(
    n: usize,
    size: (usize, usize, usize),
    square: usize,
    seed: u64,
) -> SyntheticImages {
    let (c, h, w) = size;
    assert!(square <= h && square <= w, "square must fit in the image");
    let mut rng = substream(seed, "square-data");
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let mut img = Tensor::from_fn(&[c, h, w], |_| rng.gen_range(0.0..0.3f64) as f32);
        if label == 1 {
            let top = rng.gen_range(0..=h - square);
            let left = rng.gen_range(0..=w - square);
            let data = img.data_mut();
            for ch in 0..c {
                for y in top..top + square {
                    for x in left..left + square {
                        data[(ch * h + y) * w + x] = rng.gen_range(0.85..1.0f64) as f32;
                    }
                }
            }
        }
        images.push(img);
        labels.push(label);
        ids.push(format!("sq{i:05}.ppm"));
    }
    SyntheticImages {
        images,
        labels,
        ids,
    }
}

/// Standard normal via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub struct SyntheticEmbeddings {
    pub embeddings: EmbeddingTable,
    pub labels: Vec<u8>,
    pub ids: Vec<String>,
}

/// Balanced embedding set drawn from two unit-variance Gaussians whose
/// means are `separation` standard deviations apart.
pub fn gaussian_embeddings(
    n: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> SyntheticEmbeddings {
    let mut rng = substream(seed, "gaussian-embeddings");
    // Spread the mean gap across dimensions so the between-class
    // distance is `separation` while each coordinate stays ordinary.
    let shift = separation / (dim as f64).sqrt() / 2.0;
    let mut records = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let vector: Vec<f64> = (0..dim).map(|_| normal(&mut rng) + sign * shift).collect();
        let id = format!("emb{i:05}.jpg");
        records.push((id.clone(), vector));
        labels.push(label);
        ids.push(id);
    }
    SyntheticEmbeddings {
        embeddings: EmbeddingTable::new(dim, records).expect("well-formed by construction"),
        labels,
        ids,
    }
}

/// Wrap 0/1 class labels as a single-attribute ±1 table.
pub fn attribute_table_from_labels(
    ids: &[String],
    labels: &[u8],
    attribute: &str,
) -> AttributeTable {
    let records = ids
        .iter()
        .zip(labels)
        .map(|(id, &l)| AttributeRecord {
            image_id: id.clone(),
            labels: vec![if l == 1 { 1 } else { -1 }],
        })
        .collect();
    AttributeTable::new(vec![attribute.to_string()], records).expect("unique ids by construction")
}

/// Flip a fraction of labels in place; returns the flipped indices
/// (sorted). Used to study label-noise mining against a known answer.
pub fn flip_labels(labels: &mut [u8], fraction: f64, seed: u64) -> Vec<usize> {
    assert!((0.0..=1.0).contains(&fraction));
    let n_flip = (labels.len() as f64 * fraction).round() as usize;
    let mut order: Vec<usize> = (0..labels.len()).collect();
    crate::rng::shuffle(&mut order, &mut substream(seed, "label-flips"));
    let mut flipped: Vec<usize> = order.into_iter().take(n_flip).collect();
    flipped.sort_unstable();
    for &i in &flipped {
        labels[i] = 1 - labels[i];
    }
    flipped
}

/// Write a bright-square dataset to disk as pixmaps plus an attribute
/// file (`attr.txt`), for exercising the file-based pipeline end to end.
pub fn write_square_dataset(
    dir: &Path,
    n: usize,
    size: (usize, usize, usize),
    square: usize,
    seed: u64,
    attribute: &str,
) -> Result<SyntheticImages> {
    let data = bright_square_dataset(n, size, square, seed);
    let (c, h, w) = size;
    for (id, img) in data.ids.iter().zip(&data.images) {
        let path = dir.join(id);
        let pixels = img.data();
        if c == 1 {
            let samples: Vec<u8> = pixels.iter().map(|&v| (v * 255.0).round() as u8).collect();
            write_pgm(&path, w, h, &samples)?;
        } else {
            // Channel-planar tensor to interleaved RGB.
            let mut samples = vec![0u8; 3 * h * w];
            for ch in 0..3 {
                for i in 0..h * w {
                    samples[i * 3 + ch] = (pixels[ch * h * w + i] * 255.0).round() as u8;
                }
            }
            write_ppm(&path, w, h, &samples)?;
        }
    }
    let table = attribute_table_from_labels(&data.ids, &data.labels, attribute);
    let mut buf = Vec::new();
    crate::data::write_attribute_file(&table, &mut buf).expect("vec write");
    std::fs::write(dir.join("attr.txt"), buf)
        .map_err(|e| crate::error::Error::io(dir.join("attr.txt"), e))?;
    Ok(data)
}
