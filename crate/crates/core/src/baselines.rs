//! First-order unlearning baselines: gradient ascent, gradient
//! difference and KL-regularized ascent. They train the same LoRA
//! adapters as the two-phase method and log the same records.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batches, gather, PackedExample, PackedSplit};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::model::{Model, ParameterVector, SequenceObjective};
use crate::parallel::{map_ordered, Execution};
use crate::unlearn::{batch_gradient, epoch_record, shuffled, Budget, RunLog, DEFAULT_ETA_SCALE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GradientAscent,
    GradientDifference,
    KlMinimization,
}

impl Algorithm {
    pub fn short(self) -> &'static str {
        match self {
            Algorithm::GradientAscent => "ga",
            Algorithm::GradientDifference => "gd",
            Algorithm::KlMinimization => "kl",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        [
            Algorithm::GradientAscent,
            Algorithm::GradientDifference,
            Algorithm::KlMinimization,
        ]
        .into_iter()
        .find(|a| a.short() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub learning_rate: f64,
    pub eta_scale: f64,
    pub batch_size: usize,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    /// Weight on the forget term for gradient difference.
    pub forget_weight: f64,
    /// Weight on the retain KL term.
    pub kl_weight: f64,
    pub seed: u64,
}

impl BaselineConfig {
    /// Step sizes and schedule of setup3.
    pub fn new(algorithm: Algorithm) -> Self {
        BaselineConfig {
            algorithm,
            epochs: 4,
            learning_rate: 2e-5,
            eta_scale: DEFAULT_ETA_SCALE,
            batch_size: 4,
            lora_rank: 16,
            lora_alpha: 32.0,
            forget_weight: 1.0,
            kl_weight: 1.0,
            seed: 0,
        }
    }

    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate * self.eta_scale
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.lora_rank == 0 {
            return Err(Error::config("lora_rank", "must be at least 1"));
        }
        for (field, v) in [
            ("learning_rate", self.learning_rate),
            ("eta_scale", self.eta_scale),
            ("forget_weight", self.forget_weight),
            ("kl_weight", self.kl_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be non-negative"));
            }
        }
        if !(self.lora_alpha.is_finite() && self.lora_alpha > 0.0) {
            return Err(Error::config("lora_alpha", "must be positive"));
        }
        Ok(())
    }
}

/// Mean KL gradient over the retain examples `idx` against their cached
/// reference log-probabilities.
fn kl_batch_gradient(
    model: &Model,
    idx: &[usize],
    retain: &[PackedExample],
    reference: &[Tensor],
) -> Result<ParameterVector> {
    let grads = map_ordered(Execution::default(), idx, |&i| {
        model.objective_and_gradient(&retain[i], SequenceObjective::KlToReference(&reference[i]))
    });
    let mut acc: Option<ParameterVector> = None;
    for r in grads {
        let (_, g) = r?;
        match &mut acc {
            Some(a) => a.add_scaled(1.0, &g)?,
            None => acc = Some(g),
        }
    }
    let mut g = acc.ok_or(Error::NoBatches("KL gradient"))?;
    g.scale(1.0 / idx.len() as f64);
    Ok(g)
}

/// Run one baseline. Gradient difference needs a non-empty retain set.
pub fn run_baseline(model: &mut Model, data: &PackedSplit, cfg: &BaselineConfig, budget: &Budget) -> Result<RunLog> {
    cfg.validate()?;
    let mut log = RunLog::default();
    if data.forget.is_empty() {
        log.warn("forget set is empty; nothing to unlearn");
        return Ok(log);
    }
    if cfg.algorithm == Algorithm::GradientDifference && data.retain.is_empty() {
        return Err(Error::arg(
            "retain_set",
            "gradient difference needs a non-empty retain set",
        ));
    }
    if !model.config().lora_enabled {
        model.attach_lora(cfg.lora_rank, cfg.lora_alpha, cfg.seed)?;
    }
    // reference distribution for the KL term, taken before any update
    let reference: Vec<Tensor> = if cfg.algorithm == Algorithm::KlMinimization {
        map_ordered(Execution::default(), &data.retain, |p| model.next_token_log_probs(p))
            .into_iter()
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let eta = cfg.effective_learning_rate();
    let phase = cfg.algorithm.short();
    for epoch in 0..cfg.epochs {
        if budget.exceeded() {
            log.aborted = true;
            log.warn(format!("{phase}: time budget exhausted at epoch {epoch}"));
            break;
        }
        let t0 = Instant::now();
        let start = model.trainable();
        let forget = shuffled(&data.forget, cfg.batch_size, cfg.seed, epoch as u64);
        let retain_idx = batches(data.retain.len(), cfg.batch_size, cfg.seed, 3000 + epoch as u64);
        let retain = gather(&data.retain, &retain_idx);
        for (i, fb) in forget.iter().enumerate() {
            // descent direction on the combined objective
            let (_, gf) = batch_gradient(model, fb)?;
            let mut g = gf;
            match cfg.algorithm {
                Algorithm::GradientAscent => g.scale(-1.0),
                Algorithm::GradientDifference => {
                    g.scale(-cfg.forget_weight);
                    let (_, gr) = batch_gradient(model, &retain[i % retain.len()])?;
                    g.add_scaled(1.0, &gr)?;
                }
                Algorithm::KlMinimization => {
                    g.scale(-1.0);
                    if !retain.is_empty() && cfg.kl_weight > 0.0 {
                        let rb = &retain_idx[i % retain_idx.len()];
                        let gk = kl_batch_gradient(model, rb, &data.retain, &reference)?;
                        g.add_scaled(cfg.kl_weight, &gk)?;
                    }
                }
            }
            let mut theta = model.trainable();
            theta.add_scaled(-eta, &g)?;
            model.set_trainable(&theta)?;
        }
        let end = model.trainable();
        let norm = end
            .iter()
            .zip(start.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        log.records.push(epoch_record(model, data, phase, epoch, norm, t0)?);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            Algorithm::GradientAscent,
            Algorithm::GradientDifference,
            Algorithm::KlMinimization,
        ] {
            assert_eq!(Algorithm::parse(a.short()), Some(a));
        }
        assert_eq!(Algorithm::parse("libu"), None);
    }
}
