use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{LoraTarget, ModelConfig};
use super::lora::LoraAdapter;
use super::params::{ParamLayout, ParameterVector};
use crate::data::{PackedExample, EOS_ID};
use crate::diffcore::{log_softmax_rows, Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};

const INIT_STD: f64 = 0.02;
const PER_LAYER: usize = 12;

// Offsets of per-layer tensors inside `Model::base`.
const LN1_G: usize = 0;
const LN1_B: usize = 1;
const WQ: usize = 2;
const WK: usize = 3;
const WV: usize = 4;
const WO: usize = 5;
const LN2_G: usize = 6;
const LN2_B: usize = 7;
const W1: usize = 8;
const B1: usize = 9;
const W2: usize = 10;
const B2: usize = 11;

/// What a per-sequence forward pass is scored against.
#[derive(Clone, Copy, Debug)]
pub enum SequenceObjective<'r> {
    /// Masked mean next-token cross-entropy.
    CrossEntropy,
    /// Masked mean `KL(model ‖ reference)` given the reference model's
    /// next-token log-probabilities for the same sequence.
    KlToReference(&'r Tensor),
}

/// Decoder-only transformer with pre-norm blocks and learned positions.
///
/// Weights are stored `d_in×d_out` and applied as `x · W`. With LoRA
/// enabled, the trainable vector holds adapter weights only and every
/// base tensor is read through the tape as a frozen leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    names: Vec<String>,
    base: Vec<Tensor>,
    adapters: Vec<LoraAdapter>,
    layout: Arc<ParamLayout>,
}

fn base_shapes(c: &ModelConfig) -> Vec<(String, usize, usize)> {
    let (d, v, h) = (c.d_model, c.vocab_size, c.d_model * c.mlp_ratio);
    let mut out = vec![("tok_emb".to_string(), v, d), ("pos_emb".to_string(), c.max_length, d)];
    for l in 0..c.n_layers {
        let p = |s: &str| format!("layers.{l}.{s}");
        out.extend([
            (p("ln1.gain"), 1, d),
            (p("ln1.bias"), 1, d),
            (p("attn.wq"), d, d),
            (p("attn.wk"), d, d),
            (p("attn.wv"), d, d),
            (p("attn.wo"), d, d),
            (p("ln2.gain"), 1, d),
            (p("ln2.bias"), 1, d),
            (p("mlp.w1"), d, h),
            (p("mlp.b1"), 1, h),
            (p("mlp.w2"), h, d),
            (p("mlp.b2"), 1, d),
        ]);
    }
    out.extend([
        ("ln_f.gain".to_string(), 1, d),
        ("ln_f.bias".to_string(), 1, d),
        ("unembed.w".to_string(), d, v),
        ("unembed.b".to_string(), 1, v),
    ]);
    out
}

fn target_index(t: LoraTarget) -> usize {
    match t {
        LoraTarget::Query => WQ,
        LoraTarget::Key => WK,
        LoraTarget::Value => WV,
        LoraTarget::Output => WO,
    }
}

fn init_adapters(config: &ModelConfig) -> Vec<LoraAdapter> {
    if !config.lora_enabled {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let d = config.d_model;
    let mut adapters = Vec::new();
    for layer in 0..config.n_layers {
        for &target in &config.lora_targets {
            adapters.push(LoraAdapter::init(
                layer,
                target,
                d,
                d,
                config.lora_rank,
                config.lora_scaling(),
                &mut rng,
            ));
        }
    }
    adapters
}

fn trainable_layout(config: &ModelConfig, names: &[String], base: &[Tensor], adapters: &[LoraAdapter]) -> ParamLayout {
    if config.lora_enabled {
        ParamLayout::new(adapters.iter().flat_map(|a| {
            [
                (format!("{}.lora_down", a.name()), a.down.rows(), a.down.cols()),
                (format!("{}.lora_up", a.name()), a.up.rows(), a.up.cols()),
            ]
        }))
    } else {
        ParamLayout::new(names.iter().zip(base).map(|(n, t)| (n.clone(), t.rows(), t.cols())))
    }
}

impl Model {
    /// Deterministic initialization from `config.seed`. Base weights come
    /// from one random stream and adapters from another, so enabling LoRA
    /// never perturbs the base weights.
    pub fn build(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let shapes = base_shapes(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(0);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut names = Vec::with_capacity(shapes.len());
        let mut base = Vec::with_capacity(shapes.len());
        for (name, rows, cols) in shapes {
            let data = if name.ends_with(".gain") {
                vec![1.0; rows * cols]
            } else if name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2") || name == "unembed.b" {
                vec![0.0; rows * cols]
            } else {
                (0..rows * cols).map(|_| normal.sample(&mut rng)).collect()
            };
            base.push(Tensor::matrix(rows, cols, data)?);
            names.push(name);
        }
        let adapters = init_adapters(&config);
        let layout = Arc::new(trainable_layout(&config, &names, &base, &adapters));
        Ok(Model {
            config,
            names,
            base,
            adapters,
            layout,
        })
    }

    /// Reassemble a model from stored tensors (checkpoint loading).
    pub(crate) fn from_parts(config: ModelConfig, base: Vec<Tensor>, adapters: Vec<LoraAdapter>) -> Result<Model> {
        config.validate()?;
        let shapes = base_shapes(&config);
        if shapes.len() != base.len() {
            return Err(Error::ModelMismatch(format!(
                "expected {} base tensors, found {}",
                shapes.len(),
                base.len()
            )));
        }
        let mut names = Vec::with_capacity(shapes.len());
        for ((name, rows, cols), t) in shapes.into_iter().zip(&base) {
            if t.shape() != [rows, cols] {
                return Err(Error::ModelMismatch(format!(
                    "{name}: expected {rows}x{cols}, found {:?}",
                    t.shape()
                )));
            }
            names.push(name);
        }
        let expected = if config.lora_enabled {
            config.n_layers * config.lora_targets.len()
        } else {
            0
        };
        if adapters.len() != expected {
            return Err(Error::ModelMismatch(format!(
                "expected {expected} adapters, found {}",
                adapters.len()
            )));
        }
        let layout = Arc::new(trainable_layout(&config, &names, &base, &adapters));
        Ok(Model {
            config,
            names,
            base,
            adapters,
            layout,
        })
    }

    /// Attach freshly initialized adapters; from now on only they train.
    pub fn attach_lora(&mut self, rank: usize, alpha: f64, seed: u64) -> Result<()> {
        let mut config = self.config.clone();
        config.lora_enabled = true;
        config.lora_rank = rank;
        config.lora_alpha = alpha;
        config.seed = seed;
        config.validate()?;
        self.adapters = init_adapters(&config);
        self.config = config;
        self.layout = Arc::new(trainable_layout(&self.config, &self.names, &self.base, &self.adapters));
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn base_tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.base)
    }

    pub fn adapters(&self) -> &[LoraAdapter] {
        &self.adapters
    }

    pub fn adapters_mut(&mut self) -> &mut [LoraAdapter] {
        &mut self.adapters
    }

    pub fn base_parameter_count(&self) -> usize {
        self.base.iter().map(Tensor::len).sum()
    }

    pub fn trainable_layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn trainable_count(&self) -> usize {
        self.layout.len()
    }

    fn trainable_tensors(&self) -> Vec<&Tensor> {
        if self.config.lora_enabled {
            self.adapters.iter().flat_map(|a| [&a.down, &a.up]).collect()
        } else {
            self.base.iter().collect()
        }
    }

    /// Current θ.
    pub fn trainable(&self) -> ParameterVector {
        let mut values = Vec::with_capacity(self.layout.len());
        for t in self.trainable_tensors() {
            values.extend_from_slice(t.data());
        }
        ParameterVector::new(values, self.layout.clone()).expect("layout matches tensors")
    }

    pub fn set_trainable(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.layout.len() {
            return Err(Error::LengthMismatch {
                expected: self.layout.len(),
                actual: theta.len(),
            });
        }
        let mut offset = 0;
        let mut write = |t: &mut Tensor| {
            let n = t.len();
            t.data_mut().copy_from_slice(&theta[offset..offset + n]);
            offset += n;
        };
        if self.config.lora_enabled {
            for a in &mut self.adapters {
                write(&mut a.down);
                write(&mut a.up);
            }
        } else {
            for t in &mut self.base {
                write(t);
            }
        }
        Ok(())
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if tokens.len() > self.config.max_length {
            return Err(Error::SequenceTooLong {
                len: tokens.len(),
                max_length: self.config.max_length,
            });
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::TokenOutOfRange {
                id: bad,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    fn base_leaf<'m>(&'m self, tape: &mut Tape<'m>, idx: usize) -> Var {
        if self.config.lora_enabled {
            tape.frozen(&self.base[idx])
        } else {
            tape.param(&self.base[idx], idx)
        }
    }

    fn projection<'m>(&'m self, tape: &mut Tape<'m>, x: Var, layer: usize, which: usize) -> Result<Var> {
        let w = self.base_leaf(tape, 2 + layer * PER_LAYER + which);
        let mut y = tape.matmul(x, w)?;
        if self.config.lora_enabled {
            let per_layer = self.config.lora_targets.len();
            for (k, &target) in self.config.lora_targets.iter().enumerate() {
                if target_index(target) != which {
                    continue;
                }
                let ai = layer * per_layer + k;
                let a = &self.adapters[ai];
                let down = tape.param(&a.down, 2 * ai);
                let up = tape.param(&a.up, 2 * ai + 1);
                let h = tape.matmul_nt(x, down)?;
                let delta = tape.matmul_nt(h, up)?;
                let delta = tape.scale(delta, a.scaling);
                y = tape.add(y, delta)?;
            }
        }
        Ok(y)
    }

    /// Records the forward pass on `tape` and returns the `T×V` logits.
    pub fn forward_on<'m>(&'m self, tape: &mut Tape<'m>, tokens: &[u32]) -> Result<Var> {
        self.check_tokens(tokens)?;
        let c = &self.config;
        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
        let positions: Vec<usize> = (0..tokens.len()).collect();

        let tok = self.base_leaf(tape, 0);
        let pos = self.base_leaf(tape, 1);
        let te = tape.embedding_lookup(tok, &ids)?;
        let pe = tape.embedding_lookup(pos, &positions)?;
        let mut x = tape.add(te, pe)?;

        let dh = c.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        for layer in 0..c.n_layers {
            let at = |k: usize| 2 + layer * PER_LAYER + k;
            let g1 = self.base_leaf(tape, at(LN1_G));
            let b1 = self.base_leaf(tape, at(LN1_B));
            let h = tape.layer_norm_rows(x, g1, b1)?;
            let q = self.projection(tape, h, layer, WQ)?;
            let k = self.projection(tape, h, layer, WK)?;
            let v = self.projection(tape, h, layer, WV)?;
            let mut heads = Vec::with_capacity(c.n_heads);
            for head in 0..c.n_heads {
                let qh = tape.slice_cols(q, head * dh, dh)?;
                let kh = tape.slice_cols(k, head * dh, dh)?;
                let vh = tape.slice_cols(v, head * dh, dh)?;
                let scores = tape.matmul_nt(qh, kh)?;
                let scores = tape.scale(scores, inv_sqrt);
                let attn = tape.causal_softmax_rows(scores)?;
                heads.push(tape.matmul(attn, vh)?);
            }
            let merged = tape.concat_cols(&heads)?;
            let attn_out = self.projection(tape, merged, layer, WO)?;
            x = tape.add(x, attn_out)?;

            let g2 = self.base_leaf(tape, at(LN2_G));
            let b2 = self.base_leaf(tape, at(LN2_B));
            let h = tape.layer_norm_rows(x, g2, b2)?;
            let w1 = self.base_leaf(tape, at(W1));
            let bias1 = self.base_leaf(tape, at(B1));
            let w2 = self.base_leaf(tape, at(W2));
            let bias2 = self.base_leaf(tape, at(B2));
            let m = tape.matmul(h, w1)?;
            let m = tape.add_row(m, bias1)?;
            let m = tape.gelu(m);
            let m = tape.matmul(m, w2)?;
            let m = tape.add_row(m, bias2)?;
            x = tape.add(x, m)?;
        }
        let tail = 2 + c.n_layers * PER_LAYER;
        let gf = self.base_leaf(tape, tail);
        let bf = self.base_leaf(tape, tail + 1);
        let wu = self.base_leaf(tape, tail + 2);
        let bu = self.base_leaf(tape, tail + 3);
        let xf = tape.layer_norm_rows(x, gf, bf)?;
        let logits = tape.matmul(xf, wu)?;
        tape.add_row(logits, bu)
    }

    /// Next-token logits, one row per input position.
    pub fn forward_lm(&self, tokens: &[u32]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let logits = self.forward_on(&mut tape, tokens)?;
        Ok(tape.value(logits).clone())
    }

    /// Next-token log-probabilities over the real tokens of `packed`,
    /// aligned with the rows used by [`Model::sequence_loss`].
    pub fn next_token_log_probs(&self, packed: &PackedExample) -> Result<Tensor> {
        let (inputs, _, _) = shifted(packed)?;
        Ok(log_softmax_rows(&self.forward_lm(inputs)?))
    }

    fn record_objective<'m>(
        &'m self,
        tape: &mut Tape<'m>,
        packed: &PackedExample,
        objective: SequenceObjective<'_>,
    ) -> Result<Var> {
        let (inputs, targets, mask) = shifted(packed)?;
        let logits = self.forward_on(tape, inputs)?;
        match objective {
            SequenceObjective::CrossEntropy => {
                let targets: Vec<usize> = targets.iter().map(|&t| t as usize).collect();
                tape.cross_entropy(logits, &targets, mask)
            }
            SequenceObjective::KlToReference(reference) => tape.kl_divergence(logits, reference, mask),
        }
    }

    /// Masked mean cross-entropy over the output span of one example.
    pub fn sequence_loss(&self, packed: &PackedExample) -> Result<f64> {
        self.objective(packed, SequenceObjective::CrossEntropy)
    }

    pub fn objective(&self, packed: &PackedExample, objective: SequenceObjective<'_>) -> Result<f64> {
        let mut tape = Tape::new();
        let loss = self.record_objective(&mut tape, packed, objective)?;
        Ok(tape.value(loss).data()[0])
    }

    pub fn loss_and_gradient(&self, packed: &PackedExample) -> Result<(f64, ParameterVector)> {
        self.objective_and_gradient(packed, SequenceObjective::CrossEntropy)
    }

    pub fn objective_and_gradient(
        &self,
        packed: &PackedExample,
        objective: SequenceObjective<'_>,
    ) -> Result<(f64, ParameterVector)> {
        let mut tape = Tape::new();
        let loss = self.record_objective(&mut tape, packed, objective)?;
        let value = tape.value(loss).data()[0];
        let grads = tape.backward(loss)?;
        Ok((value, self.flatten(grads)))
    }

    fn flatten(&self, grads: Gradients) -> ParameterVector {
        let mut values = Vec::with_capacity(self.layout.len());
        let slots = grads.into_slots();
        for (i, span) in self.layout.spans().iter().enumerate() {
            match slots.get(i).and_then(|s| s.as_ref()) {
                Some(t) => values.extend_from_slice(t.data()),
                None => values.extend(std::iter::repeat_n(0.0, span.len())),
            }
        }
        ParameterVector::new(values, self.layout.clone()).expect("layout matches gradient slots")
    }

    /// Greedy continuation of `prompt`. Ties go to the lowest token id;
    /// generation stops after `max_new` tokens, at end-of-sequence (not
    /// included in the result), or when the context reaches `max_length`.
    pub fn greedy_decode(&self, prompt: &[u32], max_new: usize) -> Result<Vec<u32>> {
        self.check_tokens(prompt)?;
        let mut tokens = prompt.to_vec();
        let mut out = Vec::new();
        while out.len() < max_new && tokens.len() < self.config.max_length {
            let logits = self.forward_lm(&tokens)?;
            let next = argmax_lowest(logits.row(logits.rows() - 1));
            if next == EOS_ID {
                break;
            }
            tokens.push(next);
            out.push(next);
        }
        Ok(out)
    }
}

/// Index of the largest entry; the first one wins on ties.
pub fn argmax_lowest(row: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Inputs, next-token targets and their loss mask for the real (unpadded)
/// prefix of a packed example.
fn shifted(packed: &PackedExample) -> Result<(&[u32], &[u32], &[bool])> {
    let n = packed.attention_length;
    if n < 2 {
        return Err(Error::EmptyMask);
    }
    Ok((
        &packed.token_ids[..n - 1],
        &packed.token_ids[1..n],
        &packed.loss_mask[1..n],
    ))
}
