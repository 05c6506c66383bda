//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `FKCP`, format version, RNG seed, input
//! size, a shape table for the eight parameter tensors, then their raw
//! 32-bit float data in [`super::PARAM_NAMES`] order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::CnnModel;

const MAGIC: &[u8; 4] = b"FKCP";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &CnnModel<f32>, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    for dim in [model.input_size.0, model.input_size.1, model.input_size.2] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&(p.rank() as u32).to_le_bytes());
        for &d in p.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for p in &params {
        for &v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Checkpoint(format!(
                "truncated file: wanted {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.bytes.len()
            )))?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<CnnModel<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version mismatch: file has {version}, this build reads {VERSION}"
        )));
    }
    let seed = r.u64()?;
    let c = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let n_tensors = r.u32()? as usize;
    if n_tensors != 8 {
        return Err(Error::Checkpoint(format!(
            "expected 8 parameter tensors, file has {n_tensors}"
        )));
    }
    let mut shapes = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 4 {
            return Err(Error::Checkpoint(format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        shapes.push(shape);
    }
    let mut tensors = Vec::with_capacity(n_tensors);
    for shape in &shapes {
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&v| v <= bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("implausible tensor shape {shape:?}")))?;
        let raw = r.take(len * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(Tensor::from_vec(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after tensor data",
            bytes.len() - r.pos
        )));
    }

    let mut iter = tensors.into_iter();
    let mut next = || iter.next().expect("8 tensors verified above");
    let model = CnnModel {
        input_size: (c, h, w),
        seed,
        conv1_kernels: next(),
        conv1_bias: next(),
        conv2_kernels: next(),
        conv2_bias: next(),
        dense1_weights: next(),
        dense1_bias: next(),
        dense2_weights: next(),
        dense2_bias: next(),
    };
    let reference = super::init_model::<f32>(model.input_size, seed)?;
    for ((got, want), name) in model
        .params()
        .iter()
        .zip(reference.params().iter())
        .zip(super::PARAM_NAMES)
    {
        if got.shape() != want.shape() {
            return Err(Error::Checkpoint(format!(
                "{name} has shape {:?}, expected {:?} for input size {c}x{h}x{w}",
                got.shape(),
                want.shape()
            )));
        }
    }
    if !model.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter value".into()));
    }
    Ok(model)
}
