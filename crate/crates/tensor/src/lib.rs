//! A small reverse-mode automatic differentiation engine over dense `f64`
//! tensors, with the operations a convolutional/attention speech model needs
//! and an Adam optimizer.
//!
//! ```
//! use ktts_tensor::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let x = g.param(Tensor::new(vec![2], vec![1.0, -3.0]));
//! let loss = x.square().sum();
//! let grads = g.backward(loss);
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, -6.0]);
//! ```

mod conv;
mod gradcheck;
mod graph;
mod ops;
mod optim;
mod params;
mod spectral;
mod tensor;

pub use conv::Conv1dSpec;
pub use gradcheck::{GradCheck, GradCheckReport, Mismatch};
pub use graph::{Gradients, Graph, Var};
pub use ops::{concat_cols, concat_rows};
pub use optim::{Adam, AdamConfig};
pub use params::{Bound, ParameterStore, Precision};
pub use spectral::stft_magnitude;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TensorError {
    #[error("parameter `{0}` already exists")]
    DuplicateName(String),
    #[error("no parameter named `{0}`")]
    UnknownName(String),
    #[error("parameter `{name}` has shape {old:?}; refusing {new:?}")]
    ShapeChange {
        name: String,
        old: Vec<usize>,
        new: Vec<usize>,
    },
    #[error("parameter `{0}` contains non-finite values")]
    NonFinite(String),
}
