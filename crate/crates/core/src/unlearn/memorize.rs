use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gradient::{batch_gradient, mean_loss};
use super::runlog::{Budget, EpochRecord, RunLog};
use crate::data::{batches, PackedExample, PackedSplit};
use crate::error::{Error, Result};
use crate::evaluate::exact_match_rate;
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorizeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once exact match on both splits reaches this rate.
    pub target_recall: f64,
    /// Exact-match check interval in epochs.
    pub check_every: usize,
}

impl Default for MemorizeConfig {
    fn default() -> Self {
        MemorizeConfig {
            epochs: 300,
            learning_rate: 3e-3,
            batch_size: 8,
            seed: 0,
            target_recall: 0.99,
            check_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemorizeReport {
    pub epochs_run: usize,
    pub retain_recall: f64,
    pub forget_recall: f64,
    pub reached_target: bool,
    pub log: RunLog,
}

/// Adam with bias correction.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, theta: &mut [f64], g: &[f64]) -> f64 {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let mut sq = 0.0;
        for i in 0..theta.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            let d = self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
            theta[i] -= d;
            sq += d * d;
        }
        sq.sqrt()
    }
}

fn recall(model: &Model, set: &[PackedExample]) -> Result<f64> {
    if set.is_empty() {
        Ok(1.0)
    } else {
        exact_match_rate(model, set)
    }
}

/// Fine-tune all trainable weights on retain ∪ forget until both splits
/// are reproduced verbatim. Falls short of the target with a warning
/// rather than an error.
pub fn memorize(
    model: &mut Model,
    data: &PackedSplit,
    cfg: &MemorizeConfig,
    budget: &Budget,
) -> Result<MemorizeReport> {
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    if cfg.check_every == 0 {
        return Err(Error::config("check_every", "must be at least 1"));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::config("learning_rate", "must be non-negative"));
    }
    let all: Vec<&PackedExample> = data.retain.iter().chain(&data.forget).collect();
    if all.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut log = RunLog::default();
    let mut theta = model.trainable().into_values();
    let mut adam = Adam::new(theta.len(), cfg.learning_rate);
    let mut epochs_run = 0;
    let mut reached = false;
    for epoch in 0..cfg.epochs {
        if budget.exceeded() {
            log.aborted = true;
            log.warn(format!("memorize: time budget exhausted after {epoch} epochs"));
            break;
        }
        let t0 = Instant::now();
        let mut norm_sq = 0.0;
        for idx in batches(all.len(), cfg.batch_size, cfg.seed, epoch as u64) {
            let batch: Vec<&PackedExample> = idx.iter().map(|&i| all[i]).collect();
            let (_, g) = batch_gradient(model, &batch)?;
            let n = adam.step(&mut theta, &g);
            norm_sq += n * n;
            model.set_trainable(&theta)?;
        }
        epochs_run = epoch + 1;
        log.records.push(EpochRecord {
            phase: "memorize".into(),
            epoch,
            retain_loss: mean_loss(model, &data.retain)?,
            forget_loss: mean_loss(model, &data.forget)?,
            update_norm: norm_sq.sqrt(),
            wall_ms: t0.elapsed().as_millis() as u64,
        });
        if epochs_run % cfg.check_every == 0
            && recall(model, &data.retain)? >= cfg.target_recall
            && recall(model, &data.forget)? >= cfg.target_recall
        {
            reached = true;
            break;
        }
    }
    let retain_recall = recall(model, &data.retain)?;
    let forget_recall = recall(model, &data.forget)?;
    reached |= retain_recall >= cfg.target_recall && forget_recall >= cfg.target_recall;
    if !reached {
        log.warn(format!(
            "memorize: target recall {} not reached (retain {retain_recall:.3}, forget {forget_recall:.3})",
            cfg.target_recall
        ));
    }
    Ok(MemorizeReport {
        epochs_run,
        retain_recall,
        forget_recall,
        reached_target: reached,
        log,
    })
}
