//! Regurgitation, membership inference, utility and the aggregate score.

mod metrics;
mod mia;
mod report;
mod rouge;

pub use metrics::{
    eval_prompts, exact_match, exact_match_rate, harmonic_mean, prompt_and_reference, regurgitation_rate, score_prompt,
    utility_score, Constituent, EvalPrompt, PromptScore, Regurgitation, Split,
};
pub use mia::{mia_from_scores, mia_score, mia_score_with, pairwise_auc};
pub use report::{aggregate, evaluate_model, render_table, EvalReport, AGGREGATE_FORMULA, REPORT_SCHEMA_VERSION};
pub use rouge::{lcs_len, rouge_l, rouge_l_text};
