use std::time::Instant;

use super::accumulate::GradientAccumulator;
use super::config::{InfluenceMode, UnlearnConfig};
use super::fisher::estimate_fisher_diagonal;
use super::gradient::{batch_gradient, mean_loss};
use super::influence::{influence_update, influence_weights, InfluencePlan};
use super::runlog::{Budget, EpochRecord, RunLog};
use super::sophia::SophiaState;
use crate::data::{batches, gather, PackedExample, PackedSplit};
use crate::error::Result;
use crate::model::{Model, ParameterVector};

/// Attach adapters of the configured rank unless the model already
/// trains through LoRA.
pub fn ensure_lora(model: &mut Model, cfg: &UnlearnConfig) -> Result<()> {
    if !model.config().lora_enabled {
        model.attach_lora(cfg.lora_rank, cfg.lora_alpha, cfg.seed)?;
    }
    Ok(())
}

pub(crate) fn epoch_record(
    model: &Model,
    data: &PackedSplit,
    phase: &str,
    epoch: usize,
    norm: f64,
    t0: Instant,
) -> Result<EpochRecord> {
    let loss = |set: &[PackedExample]| if set.is_empty() { Ok(0.0) } else { mean_loss(model, set) };
    Ok(EpochRecord {
        phase: phase.into(),
        epoch,
        retain_loss: loss(&data.retain)?,
        forget_loss: loss(&data.forget)?,
        update_norm: norm,
        wall_ms: t0.elapsed().as_millis() as u64,
    })
}

/// Shuffled micro-batches of `set` for one pass. The stream is offset per
/// phase so the phases do not replay the same order.
pub(crate) fn shuffled(set: &[PackedExample], batch_size: usize, seed: u64, pass: u64) -> Vec<Vec<&PackedExample>> {
    gather(set, &batches(set.len(), batch_size, seed, pass))
}

fn norm_of_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Phase 1: influence-weighted ascent on the forget loss. The Fisher
/// diagonal comes from retain gradients at the starting point (or at the
/// start of each pass with `refresh_fisher`).
pub fn run_phase1(
    model: &mut Model,
    data: &PackedSplit,
    cfg: &UnlearnConfig,
    budget: &Budget,
    log: &mut RunLog,
) -> Result<()> {
    let eta = cfg.effective_learning_rate();
    let mut plan: Option<InfluencePlan> = None;
    for epoch in 0..cfg.phase1_epochs() {
        if budget.exceeded() {
            log.aborted = true;
            log.warn(format!("phase1: time budget exhausted at epoch {epoch}"));
            return Ok(());
        }
        let t0 = Instant::now();
        let start = model.trainable();
        if plan.is_none() || cfg.refresh_fisher {
            plan = Some(if data.retain.is_empty() {
                // no retain evidence: every coordinate gets the damping bound
                influence_weights(
                    &super::fisher::FisherDiagonal::from_batch_gradients(&[start.zeros_like()])?,
                    cfg.damping_factor,
                )?
            } else {
                let rb = shuffled(&data.retain, cfg.batch_size, cfg.seed, 1000 + epoch as u64);
                influence_weights(&estimate_fisher_diagonal(model, &rb)?, cfg.damping_factor)?
            });
        }
        let w = &plan.as_ref().expect("plan set above").weights;
        let forget = shuffled(&data.forget, cfg.batch_size, cfg.seed, epoch as u64);
        let group = match cfg.influence_mode {
            InfluenceMode::PerGroup => cfg.accumulation_steps,
            InfluenceMode::PerEpoch => forget.len(),
        };
        let mut acc = GradientAccumulator::new(group)?;
        let apply = |model: &mut Model, g: ParameterVector| -> Result<()> {
            let ascent: Vec<f64> = g.iter().map(|v| -v).collect();
            let next = influence_update(&model.trainable(), w, &ascent, eta)?;
            model.set_trainable(&next)
        };
        for b in &forget {
            let (_, g) = batch_gradient(model, b)?;
            if let Some(done) = acc.push(&g)? {
                apply(model, done.gradient)?;
            }
        }
        if let Some(rest) = acc.flush() {
            apply(model, rest.gradient)?;
        }
        let norm = norm_of_diff(&model.trainable(), &start);
        log.records.push(epoch_record(model, data, "phase1", epoch, norm, t0)?);
    }
    Ok(())
}

/// Phase 2: Sophia on `−L_forget + r·L_retain`, gradients accumulated
/// over `accumulation_steps` micro-batch pairs before each step.
pub fn run_phase2(
    model: &mut Model,
    data: &PackedSplit,
    cfg: &UnlearnConfig,
    budget: &Budget,
    log: &mut RunLog,
) -> Result<()> {
    let eta = cfg.effective_learning_rate();
    let mut sophia = SophiaState::new(model.trainable_count(), cfg.sophia(), cfg.seed)?;
    let rw = cfg.phase2_retain_weight;
    for epoch in 0..cfg.phase2_epochs() {
        if budget.exceeded() {
            log.aborted = true;
            log.warn(format!("phase2: time budget exhausted at epoch {epoch}"));
            return Ok(());
        }
        let t0 = Instant::now();
        let start = model.trainable();
        let pass = 2000 + epoch as u64;
        let forget = shuffled(&data.forget, cfg.batch_size, cfg.seed, pass);
        let retain = shuffled(&data.retain, cfg.batch_size, cfg.seed, pass);
        let mut acc = GradientAccumulator::new(cfg.accumulation_steps)?;
        let mut apply = |model: &mut Model, g: ParameterVector| -> Result<()> {
            let mut theta = model.trainable().into_values();
            sophia.step(&mut theta, &g, eta)?;
            model.set_trainable(&theta)
        };
        for (i, fb) in forget.iter().enumerate() {
            let (_, gf) = batch_gradient(model, fb)?;
            let mut g = gf;
            g.scale(-1.0);
            if rw > 0.0 && !retain.is_empty() {
                let (_, gr) = batch_gradient(model, &retain[i % retain.len()])?;
                g.add_scaled(rw, &gr)?;
            }
            if let Some(done) = acc.push(&g)? {
                apply(model, done.gradient)?;
            }
        }
        if let Some(rest) = acc.flush() {
            apply(model, rest.gradient)?;
        }
        let norm = norm_of_diff(&model.trainable(), &start);
        log.records.push(epoch_record(model, data, "phase2", epoch, norm, t0)?);
    }
    Ok(())
}

/// Two-phase unlearning through LoRA adapters; base weights are never
/// written. An empty forget set leaves the model untouched.
pub fn run_libu(model: &mut Model, data: &PackedSplit, cfg: &UnlearnConfig, budget: &Budget) -> Result<RunLog> {
    cfg.validate()?;
    let mut log = RunLog::default();
    if data.forget.is_empty() {
        log.warn("forget set is empty; nothing to unlearn");
        return Ok(log);
    }
    ensure_lora(model, cfg)?;
    run_phase1(model, data, cfg, budget, &mut log)?;
    if !log.aborted {
        run_phase2(model, data, cfg, budget, &mut log)?;
    }
    Ok(log)
}
