//! Fisher-weighted influence removal followed by Sophia fine-tuning.

mod accumulate;
mod config;
mod fisher;
mod gradient;
mod influence;
mod libu;
mod memorize;
mod runlog;
mod sophia;

pub use accumulate::{accumulate_gradients, AccumulatedGradient, GradientAccumulator};
pub use config::{InfluenceMode, Preset, UnlearnConfig, DEFAULT_ETA_SCALE};
pub use fisher::{estimate_fisher_diagonal, estimate_fisher_diagonal_with, FisherDiagonal};
pub use gradient::{batch_gradient, batch_gradient_by, batch_gradient_with, mean_loss, per_example_losses};
pub use influence::{influence_update, influence_weights, mean_forget_gradient, mean_gradient_with, InfluencePlan};
pub use libu::{ensure_lora, run_libu, run_phase1, run_phase2};
pub(crate) use libu::{epoch_record, shuffled};
pub use memorize::{memorize, MemorizeConfig, MemorizeReport};
pub use runlog::{Budget, EpochRecord, RunLog};
pub use sophia::{SophiaParams, SophiaState};
