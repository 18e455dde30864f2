//! Reverse-mode differentiation over a fixed set of matrix primitives.
//!
//! A forward pass appends nodes to a [`Tape`]; [`Tape::backward`] walks the
//! record once in reverse and returns gradients for the leaves registered
//! as parameters. Everything runs in `f64`.

mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub use tensor::{log_softmax_rows, Tensor};
