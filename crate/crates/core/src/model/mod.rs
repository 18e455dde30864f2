//! Tiny causal language model with optional low-rank adapters.

mod checkpoint;
mod config;
mod lora;
mod params;
mod transformer;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{LoraTarget, ModelConfig};
pub use lora::LoraAdapter;
pub use params::{mean_of, ParamLayout, ParamSpan, ParameterVector};
pub use transformer::{argmax_lowest, Model, SequenceObjective};
