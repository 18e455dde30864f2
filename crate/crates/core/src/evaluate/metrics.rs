use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rouge::rouge_l;
use crate::data::{PackedExample, TaskKind, UnlearningExample, Vocabulary, EOS_ID};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::parallel::{map_ordered, Execution};

/// Harmonic mean of non-negative values; 0 if any value is 0.
pub fn harmonic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::arg("values", "harmonic mean of an empty list"));
    }
    let mut inv = 0.0;
    for &v in values {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::arg(
                "values",
                format!("harmonic mean needs non-negative values, got {v}"),
            ));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        inv += 1.0 / v;
    }
    Ok(values.len() as f64 / inv)
}

/// Prompt and reference continuation recovered from a packed example:
/// the prompt is everything before the first supervised position, the
/// reference is the supervised tokens without the end marker.
pub fn prompt_and_reference(packed: &PackedExample) -> (&[u32], Vec<u32>) {
    let n = packed.attention_length;
    let first = packed.loss_mask[..n].iter().position(|&m| m).unwrap_or(n);
    let reference = packed.token_ids[first..n]
        .iter()
        .zip(&packed.loss_mask[first..n])
        .filter(|(&t, &m)| m && t != EOS_ID)
        .map(|(&t, _)| t)
        .collect();
    (&packed.token_ids[..first], reference)
}

/// Greedy decode of exactly as many tokens as the reference holds,
/// compared token by token.
pub fn exact_match(model: &Model, packed: &PackedExample) -> Result<bool> {
    let (prompt, reference) = prompt_and_reference(packed);
    let decoded = model.greedy_decode(prompt, reference.len())?;
    Ok(decoded == reference)
}

/// Fraction of examples reproduced exactly.
pub fn exact_match_rate(model: &Model, examples: &[PackedExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::arg("examples", "exact-match rate of an empty set"));
    }
    let hits = map_ordered(Execution::default(), examples, |p| exact_match(model, p))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// One evaluation prompt in token space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPrompt {
    pub id: String,
    pub task: String,
    pub prompt: Vec<u32>,
    pub reference: Vec<u32>,
}

impl EvalPrompt {
    pub fn from_example(example: &UnlearningExample, vocab: &Vocabulary) -> Result<Self> {
        Ok(EvalPrompt {
            id: example.id.clone(),
            task: example.task.clone(),
            prompt: vocab.encode(&example.input)?,
            reference: vocab.encode(&example.output)?,
        })
    }

    pub fn kind(&self) -> TaskKind {
        TaskKind::of(&self.task)
    }
}

pub fn eval_prompts(examples: &[UnlearningExample], vocab: &Vocabulary) -> Result<Vec<EvalPrompt>> {
    examples.iter().map(|e| EvalPrompt::from_example(e, vocab)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Forget,
    Retain,
}

/// Raw generation quality of one prompt, before any inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptScore {
    pub id: String,
    pub task: String,
    pub rouge_l: f64,
    pub exact_match: bool,
    /// Decoding failed; the prompt counts as 0 for ROUGE-L and as a miss.
    pub failed: bool,
}

/// Mean score of one (task, metric) group, oriented so that higher is
/// better for the split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub task: String,
    pub metric: String,
    pub n: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regurgitation {
    pub split: Split,
    pub score: f64,
    /// Fraction of prompts whose continuation is reproduced exactly.
    pub exact_match: f64,
    pub constituents: Vec<Constituent>,
    pub prompts: Vec<PromptScore>,
}

pub fn score_prompt(model: &Model, prompt: &EvalPrompt) -> PromptScore {
    let decoded = model
        .greedy_decode(&prompt.prompt, prompt.reference.len())
        .and_then(|d| Ok((rouge_l(&d, &prompt.reference)?, d == prompt.reference)));
    let (rouge, em, failed) = match decoded {
        Ok((r, em)) => (r, em, false),
        Err(_) => (0.0, false, true),
    };
    PromptScore {
        id: prompt.id.clone(),
        task: prompt.task.clone(),
        rouge_l: rouge,
        exact_match: em,
        failed,
    }
}

/// Regurgitation score of one split: completion tasks contribute mean
/// ROUGE-L, question-answer tasks mean exact match, both per task. On the
/// forget split each constituent is inverted (`1 − x`). The split score is
/// the harmonic mean of the constituents.
pub fn regurgitation_rate(model: &Model, prompts: &[EvalPrompt], split: Split) -> Result<Regurgitation> {
    if prompts.is_empty() {
        return Err(Error::arg("prompts", "regurgitation over an empty prompt set"));
    }
    let scores = map_ordered(Execution::default(), prompts, |p| score_prompt(model, p));
    let mut groups: BTreeMap<&str, Vec<&PromptScore>> = BTreeMap::new();
    for s in &scores {
        groups.entry(s.task.as_str()).or_default().push(s);
    }
    let mut constituents = Vec::new();
    for (task, members) in groups {
        let (metric, raw) = match TaskKind::of(task) {
            TaskKind::Completion => ("rouge_l", members.iter().map(|s| s.rouge_l).sum::<f64>()),
            TaskKind::QuestionAnswer => ("exact_match", members.iter().filter(|s| s.exact_match).count() as f64),
        };
        let mean = raw / members.len() as f64;
        constituents.push(Constituent {
            task: task.to_string(),
            metric: metric.to_string(),
            n: members.len(),
            score: match split {
                Split::Forget => 1.0 - mean,
                Split::Retain => mean,
            },
        });
    }
    let score = harmonic_mean(&constituents.iter().map(|c| c.score).collect::<Vec<_>>())?;
    let exact_match = scores.iter().filter(|s| s.exact_match).count() as f64 / scores.len() as f64;
    Ok(Regurgitation {
        split,
        score,
        exact_match,
        constituents,
        prompts: scores,
    })
}

/// Exact-match accuracy on held-out questions.
pub fn utility_score(model: &Model, prompts: &[EvalPrompt]) -> Result<f64> {
    if prompts.is_empty() {
        return Err(Error::arg("utility_set", "must be non-empty"));
    }
    let scores = map_ordered(Execution::default(), prompts, |p| score_prompt(model, p));
    Ok(scores.iter().filter(|s| s.exact_match).count() as f64 / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{pack, UnlearningExample};

    #[test]
    fn harmonic_mean_cases() {
        assert!((harmonic_mean(&[0.5, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(harmonic_mean(&[0.7, 0.0, 0.9]).unwrap(), 0.0);
        assert_eq!(harmonic_mean(&[0.4]).unwrap(), 0.4);
        assert!(harmonic_mean(&[]).is_err());
        assert!(harmonic_mean(&[-0.1]).is_err());
    }

    #[test]
    fn prompt_reference_split() {
        let ex = UnlearningExample::new("a", "x y", "z w", "task1_completion");
        let vocab = Vocabulary::from_examples([&ex]).unwrap();
        let p = pack(&ex, &vocab, 8).unwrap();
        let (prompt, reference) = prompt_and_reference(&p);
        assert_eq!(prompt, vocab.encode("x y").unwrap().as_slice());
        assert_eq!(reference, vocab.encode("z w").unwrap());
    }
}
