//! Reverse-mode differentiable numeric stack: tensors, the tape, the
//! parameter store with its optimizer and checkpoint format, network
//! blocks, losses, and the finite-difference oracle.

pub mod blocks;
pub mod gradcheck;
pub(crate) mod kernels;
pub mod loss;
pub mod params;
pub mod tape;
pub mod tensor;

pub use blocks::{MlpSpec, MpnnSpec};
pub use params::ParameterStore;
pub use tape::{Tape, ValueId};
pub use tensor::Tensor;
