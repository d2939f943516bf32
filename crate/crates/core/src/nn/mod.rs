//! Minimal dense tensor kernel: exactly the layers the warping network needs,
//! each with a hand-written backward pass.

mod activation;
mod adam;
mod conv;
mod linear;
mod scalar;
mod tensor;
mod weights;

pub use activation::{
    cos_pi, cos_pi_backward, pi, relu, relu_backward, sin_pi, sin_pi_backward,
};
pub use adam::Adam;
pub use conv::{conv3x3, conv3x3_backward, ConvGrads};
pub use linear::{linear, linear_backward, LinearGrads};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use weights::{ModelWeights, MAGIC};
