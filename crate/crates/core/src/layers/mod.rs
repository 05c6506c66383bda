//! Differentiable layer set: convolution, max pooling, dense, ReLU,
//! dropout, softmax and cross-entropy. Gradients are hand-derived per
//! layer; `crate::gradcheck` verifies them against finite differences.

mod activation;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{
    cross_entropy, relu, relu_backward, softmax, softmax_cross_entropy_backward, PROB_FLOOR,
};
pub use conv::{conv2d, conv2d_backward, ConvGradients, Padding};
pub use dense::{dense, dense_backward, DenseGradients};
pub use dropout::{dropout, dropout_backward, DropoutOutput};
pub use pool::{maxpool2d, maxpool2d_backward, MaxPoolOutput};
