use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Projection matrices inside an attention block that can carry an adapter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoraTarget {
    Query,
    Key,
    Value,
    Output,
}

impl LoraTarget {
    pub fn short(self) -> &'static str {
        match self {
            LoraTarget::Query => "q",
            LoraTarget::Key => "k",
            LoraTarget::Value => "v",
            LoraTarget::Output => "o",
        }
    }
}

fn default_targets() -> Vec<LoraTarget> {
    vec![LoraTarget::Query, LoraTarget::Value]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Hidden width of the feed-forward block as a multiple of `d_model`.
    pub mlp_ratio: usize,
    pub max_length: usize,
    pub lora_enabled: bool,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    #[serde(default = "default_targets")]
    pub lora_targets: Vec<LoraTarget>,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults: two layers of width 64 with four heads.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            mlp_ratio: 4,
            max_length: 64,
            lora_enabled: false,
            lora_rank: 8,
            lora_alpha: 16.0,
            lora_targets: default_targets(),
            seed: 0,
        }
    }

    pub fn with_lora(mut self, rank: usize, alpha: f64) -> Self {
        self.lora_enabled = true;
        self.lora_rank = rank;
        self.lora_alpha = alpha;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn lora_scaling(&self) -> f64 {
        self.lora_alpha / self.lora_rank as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 3 {
            return Err(Error::config("vocab_size", "must exceed the two reserved ids"));
        }
        if self.d_model == 0 {
            return Err(Error::config("d_model", "must be positive"));
        }
        if self.n_layers == 0 {
            return Err(Error::config("n_layers", "must be positive"));
        }
        if self.n_heads == 0 {
            return Err(Error::config("n_heads", "must be positive"));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(
                "n_heads",
                format!("{} does not divide d_model {}", self.n_heads, self.d_model),
            ));
        }
        if self.mlp_ratio == 0 {
            return Err(Error::config("mlp_ratio", "must be positive"));
        }
        if self.max_length < 2 {
            return Err(Error::config("max_length", "must be at least 2"));
        }
        if self.lora_enabled {
            if self.lora_rank == 0 {
                return Err(Error::config("lora_rank", "must be positive"));
            }
            if self.lora_rank > self.d_model {
                return Err(Error::config(
                    "lora_rank",
                    format!("{} exceeds d_model {}", self.lora_rank, self.d_model),
                ));
            }
            if !(self.lora_alpha.is_finite() && self.lora_alpha > 0.0) {
                return Err(Error::config("lora_alpha", "must be a positive real"));
            }
            if self.lora_targets.is_empty() {
                return Err(Error::config("lora_targets", "at least one target required"));
            }
        }
        Ok(())
    }
}
