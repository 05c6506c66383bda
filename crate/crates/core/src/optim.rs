//! SGD with classical momentum: `v ← μv − ηg`, `p ← p + v`.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct SgdHyper {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl SgdHyper {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One momentum-SGD update on a parameter tensor. `velocity` must have
/// the parameter's shape and persists across steps.
pub fn sgd_step<T: Element>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    velocity: &mut Tensor<T>,
    hyper: SgdHyper,
) -> Result<()> {
    hyper.validate()?;
    if param.shape() != grad.shape() || param.shape() != velocity.shape() {
        return Err(Error::ShapeMismatch(format!(
            "sgd step: param {:?}, grad {:?}, velocity {:?}",
            param.shape(),
            grad.shape(),
            velocity.shape()
        )));
    }
    let mu = T::from_f64(hyper.momentum);
    let eta = T::from_f64(hyper.learning_rate);
    let p = param.data_mut();
    let v = velocity.data_mut();
    let g = grad.data();
    for i in 0..p.len() {
        v[i] = mu * v[i] - eta * g[i];
        p[i] += v[i];
    }
    Ok(())
}
