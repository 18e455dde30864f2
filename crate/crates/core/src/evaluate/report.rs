use serde::{Deserialize, Serialize};

use super::metrics::{eval_prompts, harmonic_mean, regurgitation_rate, utility_score, Regurgitation, Split};
use super::mia::mia_score;
use crate::data::{pack_all, SyntheticCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::model::Model;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const AGGREGATE_FORMULA: &str = "final = mean(task_aggregate, 1 - |mia_score|, utility); \
task_aggregate = harmonic_mean(forget_regurgitation, retain_regurgitation, 1 - forget_exact_match, retain_exact_match)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub formula: String,
    pub forget_regurgitation: f64,
    pub retain_regurgitation: f64,
    pub forget_exact_match: f64,
    pub retain_exact_match: f64,
    pub task_aggregate: f64,
    pub mia_score: f64,
    pub utility: f64,
    pub final_score: f64,
    pub n_forget_prompts: usize,
    pub n_retain_prompts: usize,
    pub n_utility_prompts: usize,
    pub n_mia_members: usize,
    pub n_mia_nonmembers: usize,
    pub forget: Regurgitation,
    pub retain: Regurgitation,
}

/// Headline numbers: `(task_aggregate, final)`.
pub fn aggregate(
    forget_regurgitation: f64,
    retain_regurgitation: f64,
    forget_exact_match: f64,
    retain_exact_match: f64,
    mia: f64,
    utility: f64,
) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&mia) {
        return Err(Error::arg("mia_score", format!("must lie in [-1, 1], got {mia}")));
    }
    let task = harmonic_mean(&[
        forget_regurgitation,
        retain_regurgitation,
        1.0 - forget_exact_match,
        retain_exact_match,
    ])?;
    Ok((task, (task + (1.0 - mia.abs()) + utility) / 3.0))
}

/// Full evaluation of a model against a corpus.
pub fn evaluate_model(model: &Model, vocab: &Vocabulary, corpus: &SyntheticCorpus) -> Result<EvalReport> {
    let forget = regurgitation_rate(model, &eval_prompts(&corpus.split.forget, vocab)?, Split::Forget)?;
    let retain = regurgitation_rate(model, &eval_prompts(&corpus.split.retain, vocab)?, Split::Retain)?;
    let utility_prompts = eval_prompts(&corpus.utility, vocab)?;
    let utility = utility_score(model, &utility_prompts)?;
    let max_length = model.config().max_length;
    let members = pack_all(&corpus.mia_member, vocab, max_length)?;
    let nonmembers = pack_all(&corpus.mia_nonmember, vocab, max_length)?;
    let mia = mia_score(model, &members, &nonmembers)?;
    let (task_aggregate, final_score) = aggregate(
        forget.score,
        retain.score,
        forget.exact_match,
        retain.exact_match,
        mia,
        utility,
    )?;
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        formula: AGGREGATE_FORMULA.to_string(),
        forget_regurgitation: forget.score,
        retain_regurgitation: retain.score,
        forget_exact_match: forget.exact_match,
        retain_exact_match: retain.exact_match,
        task_aggregate,
        mia_score: mia,
        utility,
        final_score,
        n_forget_prompts: forget.prompts.len(),
        n_retain_prompts: retain.prompts.len(),
        n_utility_prompts: utility_prompts.len(),
        n_mia_members: members.len(),
        n_mia_nonmembers: nonmembers.len(),
        forget,
        retain,
    })
}

/// Plain-text comparison table. The best entry of each column carries a
/// trailing `*`; for the MIA column best means closest to zero.
pub fn render_table(rows: &[(String, EvalReport)]) -> Result<String> {
    if let Some((_, first)) = rows.first() {
        if let Some((name, r)) = rows.iter().find(|(_, r)| r.schema_version != first.schema_version) {
            return Err(Error::arg(
                "reports",
                format!(
                    "schema version {} of '{name}' differs from {}",
                    r.schema_version, first.schema_version
                ),
            ));
        }
    }
    type Col = (&'static str, fn(&EvalReport) -> f64, bool);
    let cols: [Col; 4] = [
        ("Final", |r| r.final_score, true),
        ("Task Agg.", |r| r.task_aggregate, true),
        ("MIA", |r| r.mia_score, false),
        ("Utility", |r| r.utility, true),
    ];
    let name_w = rows
        .iter()
        .map(|(n, _)| n.len())
        .max()
        .unwrap_or(0)
        .max("Algorithm".len());
    let mut out = format!("{:<name_w$}", "Algorithm");
    for (title, _, _) in &cols {
        out.push_str(&format!(" | {title:>10}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(name_w + cols.len() * 13));
    out.push('\n');
    let best: Vec<f64> = cols
        .iter()
        .map(|(_, get, higher)| {
            let vals = rows.iter().map(|(_, r)| if *higher { get(r) } else { -get(r).abs() });
            vals.fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    for (name, r) in rows {
        out.push_str(&format!("{name:<name_w$}"));
        for ((_, get, higher), b) in cols.iter().zip(&best) {
            let v = get(r);
            let key = if *higher { v } else { -v.abs() };
            let mark = if key == *b { "*" } else { " " };
            out.push_str(&format!(" | {:>9.4}{mark}", v));
        }
        out.push('\n');
    }
    Ok(out)
}
