//! Reverse-mode differentiable tensor substrate.
//!
//! Exactly the operations the rest of the library needs: dense f64 tensors,
//! a Wengert tape with analytic adjoints for every op, and a GEMM shim.

pub(crate) mod gemm;
mod tape;
mod tensor;

pub use tape::{Tape, Var};
pub use tensor::Tensor;
