//! Minimal f64 numeric core: dense and sparse matrices, a tape for reverse
//! mode over a fixed layer set, Adam, and finite-difference gradient checks.

pub mod gradcheck;
pub mod params;
pub mod sparse;
pub mod tape;
pub mod tensor;

pub use gradcheck::grad_check;
pub use params::{GradMap, ParamStore};
pub use sparse::SparseMatrix;
pub use tape::{sigmoid, sigmoid_mse, softmax_ce, softmax_rows, NodeId, Tape};
pub use tensor::Tensor2;
