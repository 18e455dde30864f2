//! Key-value config files using the uppercase hyperparameter names of the
//! reference settings, plus a few desk-scale extras.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use libu::baselines::{Algorithm, BaselineConfig};
use libu::unlearn::{InfluenceMode, Preset, UnlearnConfig};
use serde::Serialize;

/// Parsed `KEY = VALUE` lines keyed by uppercase name.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct KvConfig(pub BTreeMap<String, String>);

impl KvConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{origin}:{}: expected KEY = VALUE", n + 1);
            };
            let key = k.trim().to_ascii_uppercase();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{origin}:{}: unknown key {key}", n + 1);
            }
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                bail!("{origin}:{}: duplicate key {key}", n + 1);
            }
        }
        Ok(KvConfig(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }
}

pub const KNOWN_KEYS: &[&str] = &[
    "NUM_EPOCHS",
    "LEARNING_RATE",
    "BATCH_SIZE",
    "LORA_RANK",
    "ACCUMULATION_STEPS",
    "MAX_LENGTH",
    "DAMPING_FACTOR",
    "SOPHIA_RHO",
    "SOPHIA_GAMMA",
    "SOPHIA_CLIP",
    "SOPHIA_BETA",
    "SOPHIA_EPSILON",
    "LORA_ALPHA",
    "ETA_SCALE",
    "PHASE2_RETAIN_WEIGHT",
    "PHASE1_EPOCHS",
    "PHASE2_EPOCHS",
    "INFLUENCE_MODE",
    "REFRESH_FISHER",
    "KL_WEIGHT",
    "FORGET_WEIGHT",
];

/// Keys whose values a named preset fixes.
const PRESET_KEYS: &[&str] = &[
    "NUM_EPOCHS",
    "LEARNING_RATE",
    "BATCH_SIZE",
    "LORA_RANK",
    "ACCUMULATION_STEPS",
    "MAX_LENGTH",
    "DAMPING_FACTOR",
    "SOPHIA_RHO",
    "SOPHIA_GAMMA",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow::anyhow!("invalid value for {key}: {v}"))
}

fn preset_value(cfg: &UnlearnConfig, key: &str) -> f64 {
    match key {
        "NUM_EPOCHS" => cfg.num_epochs as f64,
        "LEARNING_RATE" => cfg.learning_rate,
        "BATCH_SIZE" => cfg.batch_size as f64,
        "LORA_RANK" => cfg.lora_rank as f64,
        "ACCUMULATION_STEPS" => cfg.accumulation_steps as f64,
        "MAX_LENGTH" => cfg.max_length as f64,
        "DAMPING_FACTOR" => cfg.damping_factor,
        "SOPHIA_RHO" => cfg.sophia_rho,
        "SOPHIA_GAMMA" => cfg.sophia_gamma,
        _ => unreachable!("not a preset key"),
    }
}

/// Which preset a run starts from; `custom` starts from setup3 and
/// accepts any override.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetChoice {
    Named(Preset),
    Custom,
}

impl PresetChoice {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "custom" {
            return Ok(PresetChoice::Custom);
        }
        Preset::parse(s)
            .map(PresetChoice::Named)
            .ok_or_else(|| anyhow::anyhow!("unknown preset {s}; valid: setup1, setup2, setup3, custom"))
    }

    pub fn name(self) -> &'static str {
        match self {
            PresetChoice::Named(p) => p.name(),
            PresetChoice::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: String,
    pub algorithm: String,
    pub unlearn: UnlearnConfig,
    pub kl_weight: f64,
    pub forget_weight: f64,
}

/// Resolve preset + overrides. Overriding a preset-fixed key with a
/// different value needs `allow_override` unless the preset is custom.
pub fn resolve(
    preset: PresetChoice,
    algorithm: &str,
    kv: &KvConfig,
    allow_override: bool,
    seed: u64,
    eta_scale: Option<f64>,
) -> Result<ExperimentConfig> {
    let mut cfg = match preset {
        PresetChoice::Named(p) => UnlearnConfig::preset(p),
        PresetChoice::Custom => UnlearnConfig::default(),
    };
    let base = cfg.clone();
    let mut kl_weight = 1.0;
    let mut forget_weight = 1.0;
    for (key, v) in &kv.0 {
        let k = key.as_str();
        if PRESET_KEYS.contains(&k) && matches!(preset, PresetChoice::Named(_)) && !allow_override {
            let value: f64 = num(k, v)?;
            if value != preset_value(&base, k) {
                bail!(
                    "{k} = {v} conflicts with preset {} ({}); pass --allow-override to apply it",
                    preset.name(),
                    preset_value(&base, k)
                );
            }
        }
        match k {
            "NUM_EPOCHS" => cfg.num_epochs = num(k, v)?,
            "LEARNING_RATE" => cfg.learning_rate = num(k, v)?,
            "BATCH_SIZE" => cfg.batch_size = num(k, v)?,
            "LORA_RANK" => cfg.lora_rank = num(k, v)?,
            "ACCUMULATION_STEPS" => cfg.accumulation_steps = num(k, v)?,
            "MAX_LENGTH" => cfg.max_length = num(k, v)?,
            "DAMPING_FACTOR" => cfg.damping_factor = num(k, v)?,
            "SOPHIA_RHO" => cfg.sophia_rho = num(k, v)?,
            "SOPHIA_GAMMA" => cfg.sophia_gamma = num(k, v)?,
            "SOPHIA_CLIP" => cfg.sophia_clip = num(k, v)?,
            "SOPHIA_BETA" => cfg.sophia_beta = num(k, v)?,
            "SOPHIA_EPSILON" => cfg.sophia_epsilon = num(k, v)?,
            "LORA_ALPHA" => cfg.lora_alpha = num(k, v)?,
            "ETA_SCALE" => cfg.eta_scale = num(k, v)?,
            "PHASE2_RETAIN_WEIGHT" => cfg.phase2_retain_weight = num(k, v)?,
            "PHASE1_EPOCHS" => cfg.phase1_epochs = Some(num(k, v)?),
            "PHASE2_EPOCHS" => cfg.phase2_epochs = Some(num(k, v)?),
            "INFLUENCE_MODE" => {
                cfg.influence_mode = match v.to_ascii_lowercase().as_str() {
                    "per_group" => InfluenceMode::PerGroup,
                    "per_epoch" => InfluenceMode::PerEpoch,
                    _ => bail!("invalid value for INFLUENCE_MODE: {v} (per_group|per_epoch)"),
                }
            }
            "REFRESH_FISHER" => cfg.refresh_fisher = num(k, v)?,
            "KL_WEIGHT" => kl_weight = num(k, v)?,
            "FORGET_WEIGHT" => forget_weight = num(k, v)?,
            _ => unreachable!("keys are checked at parse time"),
        }
    }
    if let Some(e) = eta_scale {
        cfg.eta_scale = e;
    }
    cfg.seed = seed;
    cfg.validate()?;
    Ok(ExperimentConfig {
        preset: preset.name().to_string(),
        algorithm: algorithm.to_string(),
        unlearn: cfg,
        kl_weight,
        forget_weight,
    })
}

impl ExperimentConfig {
    /// Baseline settings matched to the unlearning schedule: same epochs,
    /// step size, batch size and adapter shape.
    pub fn baseline(&self, algorithm: Algorithm) -> BaselineConfig {
        let u = &self.unlearn;
        BaselineConfig {
            algorithm,
            epochs: u.num_epochs,
            learning_rate: u.learning_rate,
            eta_scale: u.eta_scale,
            batch_size: u.batch_size,
            lora_rank: u.lora_rank,
            lora_alpha: u.lora_alpha,
            forget_weight: self.forget_weight,
            kl_weight: self.kl_weight,
            seed: u.seed,
        }
    }
}
