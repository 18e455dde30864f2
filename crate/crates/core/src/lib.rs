//! Machine unlearning for small causal language models: a tape-based
//! autodiff core, a tiny LoRA-capable transformer, a synthetic corpus,
//! two-phase Fisher/Sophia unlearning, first-order baselines and the
//! evaluation metrics used to compare them.

pub mod baselines;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod parallel;
pub mod unlearn;

pub use error::{Error, Result};
