//! Seeded generator for memorize-then-unlearn corpora.
//!
//! Text comes from a random sparse bigram grammar over `w###` words. A
//! fraction of words ("fact" words) have exactly one successor; the rest
//! branch. Three task families mirror long-form completion, short PII
//! question answering and document snippets:
//!
//! * `task1_completion`: `story` + three walk words → the next walk words
//! * `task2_pii_qa`: `p### <attribute> ?` → a unique answer token
//! * `task3_document`: `doc` + two walk words → a longer walk
//!
//! The utility set asks for the successor of a fact word in a fresh
//! context, so it measures what the model generalized from the grammar
//! rather than what it memorized. Membership-inference members are the
//! first forget examples; non-members come from the same generator and are
//! never trained on.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::example::{read_jsonl, write_jsonl, SplitDataset, UnlearningExample};
use crate::error::{Error, Result};

pub const RETAIN_FILE: &str = "retain.jsonl";
pub const FORGET_FILE: &str = "forget.jsonl";
pub const UTILITY_FILE: &str = "utility.jsonl";
pub const MIA_MEMBER_FILE: &str = "mia_member.jsonl";
pub const MIA_NONMEMBER_FILE: &str = "mia_nonmember.jsonl";

pub const TASK_COMPLETION: &str = "task1_completion";
pub const TASK_PII_QA: &str = "task2_pii_qa";
pub const TASK_DOCUMENT: &str = "task3_document";
pub const TASK_UTILITY: &str = "utility_qa";

const ATTRIBUTES: [&str; 4] = ["phone", "email", "account", "address"];
const MAX_ATTEMPTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskMix {
    pub completion: usize,
    pub qa: usize,
    pub document: usize,
}

impl TaskMix {
    /// Split `total` as evenly as possible, completions first.
    pub fn even(total: usize) -> Self {
        let base = total / 3;
        let rem = total % 3;
        TaskMix {
            completion: base + usize::from(rem > 0),
            qa: base + usize::from(rem > 1),
            document: base,
        }
    }

    pub fn total(&self) -> usize {
        self.completion + self.qa + self.document
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub forget: TaskMix,
    pub retain: TaskMix,
    pub utility: usize,
    pub mia_member: usize,
    pub mia_nonmember: usize,
    pub n_words: usize,
    /// Fraction of grammar words with a single deterministic successor.
    pub fact_fraction: f64,
    pub branching: usize,
    pub completion_output: usize,
    pub document_output: usize,
}

impl CorpusSpec {
    pub fn with_counts(forget: usize, retain: usize, utility: usize, mia_member: usize, mia_nonmember: usize) -> Self {
        CorpusSpec {
            forget: TaskMix::even(forget),
            retain: TaskMix::even(retain),
            utility,
            mia_member,
            mia_nonmember,
            n_words: 96,
            fact_fraction: 0.4,
            branching: 3,
            completion_output: 8,
            document_output: 12,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidCorpusSpec(m.to_string()));
        if self.forget.total() == 0 {
            return bad("forget count must be positive");
        }
        if self.retain.total() == 0 {
            return bad("retain count must be positive");
        }
        if self.utility == 0 {
            return bad("utility count must be positive");
        }
        if self.mia_member == 0 || self.mia_nonmember == 0 {
            return bad("MIA member and non-member counts must be positive");
        }
        if self.mia_member > self.forget.total() {
            return bad("MIA members are drawn from the forget split and cannot outnumber it");
        }
        if self.n_words < 8 {
            return bad("n_words must be at least 8");
        }
        if self.branching < 2 || self.branching >= self.n_words {
            return bad("branching must be in [2, n_words)");
        }
        if !(0.0..1.0).contains(&self.fact_fraction) {
            return bad("fact_fraction must be in [0, 1)");
        }
        if self.completion_output == 0 || self.document_output == 0 {
            return bad("output lengths must be positive");
        }
        Ok(())
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec::with_counts(32, 32, 64, 32, 32)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub split: SplitDataset,
    pub utility: Vec<UnlearningExample>,
    pub mia_member: Vec<UnlearningExample>,
    pub mia_nonmember: Vec<UnlearningExample>,
}

impl SyntheticCorpus {
    pub fn all_examples(&self) -> impl Iterator<Item = &UnlearningExample> {
        self.split
            .iter()
            .chain(&self.utility)
            .chain(&self.mia_member)
            .chain(&self.mia_nonmember)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(RETAIN_FILE), &self.split.retain)?;
        write_jsonl(&dir.join(FORGET_FILE), &self.split.forget)?;
        write_jsonl(&dir.join(UTILITY_FILE), &self.utility)?;
        write_jsonl(&dir.join(MIA_MEMBER_FILE), &self.mia_member)?;
        write_jsonl(&dir.join(MIA_NONMEMBER_FILE), &self.mia_nonmember)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let split = super::example::load_dataset(&dir.join(RETAIN_FILE), &dir.join(FORGET_FILE))?;
        Ok(SyntheticCorpus {
            split,
            utility: read_jsonl(&dir.join(UTILITY_FILE))?,
            mia_member: read_jsonl(&dir.join(MIA_MEMBER_FILE))?,
            mia_nonmember: read_jsonl(&dir.join(MIA_NONMEMBER_FILE))?,
        })
    }
}

struct Grammar {
    successors: Vec<Vec<usize>>,
}

impl Grammar {
    fn new(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Self {
        let n = spec.n_words;
        let successors = (0..n)
            .map(|_| {
                let k = if rng.random_bool(spec.fact_fraction) {
                    1
                } else {
                    spec.branching
                };
                rand::seq::index::sample(rng, n, k).into_vec()
            })
            .collect();
        Grammar { successors }
    }

    fn is_fact(&self, w: usize) -> bool {
        self.successors[w].len() == 1
    }

    fn walk_from(&self, start: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        let mut cur = start;
        for _ in 0..len {
            out.push(cur);
            cur = *self.successors[cur].choose(rng).expect("successor sets are non-empty");
        }
        out
    }

    fn continue_walk(&self, from: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let next = *self.successors[from].choose(rng).expect("successor sets are non-empty");
        self.walk_from(next, len, rng)
    }
}

fn word(i: usize) -> String {
    format!("w{i:03}")
}

fn words(ids: &[usize]) -> String {
    ids.iter().map(|&i| word(i)).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy)]
enum Kind {
    Completion,
    Qa,
    Document,
}

struct Generator<'s> {
    spec: &'s CorpusSpec,
    grammar: Grammar,
    rng: ChaCha8Rng,
    inputs: HashSet<String>,
    answers: HashSet<String>,
    people: usize,
}

impl Generator<'_> {
    fn unique_input(
        &mut self,
        mut make: impl FnMut(&Grammar, &mut ChaCha8Rng) -> (String, String),
    ) -> Result<(String, String)> {
        for _ in 0..MAX_ATTEMPTS {
            let (input, output) = make(&self.grammar, &mut self.rng);
            if self.inputs.insert(input.clone()) {
                return Ok((input, output));
            }
        }
        Err(Error::InvalidCorpusSpec(
            "grammar too small for the requested number of distinct prompts".into(),
        ))
    }

    fn example(&mut self, id: String, kind: Kind) -> Result<UnlearningExample> {
        let n = self.spec.n_words;
        let (input, output, task) = match kind {
            Kind::Completion => {
                let out_len = self.spec.completion_output;
                let (i, o) = self.unique_input(|g, rng| {
                    let prompt = g.walk_from(rng.random_range(0..n), 3, rng);
                    let cont = g.continue_walk(*prompt.last().unwrap(), out_len, rng);
                    (format!("story {}", words(&prompt)), words(&cont))
                })?;
                (i, o, TASK_COMPLETION)
            }
            Kind::Document => {
                let out_len = self.spec.document_output;
                let (i, o) = self.unique_input(|g, rng| {
                    let prompt = g.walk_from(rng.random_range(0..n), 2, rng);
                    let cont = g.continue_walk(*prompt.last().unwrap(), out_len, rng);
                    (format!("doc {}", words(&prompt)), words(&cont))
                })?;
                (i, o, TASK_DOCUMENT)
            }
            Kind::Qa => {
                let person = self.people;
                self.people += 1;
                let attr = *ATTRIBUTES.choose(&mut self.rng).expect("non-empty");
                let input = format!("p{person:03} {attr} ?");
                self.inputs.insert(input.clone());
                let answer = loop {
                    let a = format!("n{:05}", self.rng.random_range(0..100_000u32));
                    if self.answers.insert(a.clone()) {
                        break a;
                    }
                };
                (input, answer, TASK_PII_QA)
            }
        };
        Ok(UnlearningExample::new(id, input, output, task))
    }

    fn split(&mut self, prefix: &str, mix: TaskMix) -> Result<Vec<UnlearningExample>> {
        let kinds = std::iter::repeat_n(Kind::Completion, mix.completion)
            .chain(std::iter::repeat_n(Kind::Qa, mix.qa))
            .chain(std::iter::repeat_n(Kind::Document, mix.document));
        kinds
            .enumerate()
            .map(|(i, k)| self.example(format!("{prefix}-{i:03}"), k))
            .collect()
    }

    fn utility(&mut self, count: usize) -> Result<Vec<UnlearningExample>> {
        let n = self.spec.n_words;
        if !(0..n).any(|w| self.grammar.is_fact(w)) {
            return Err(Error::InvalidCorpusSpec("grammar has no fact words".into()));
        }
        (0..count)
            .map(|i| {
                let (input, output) = self.unique_input(|g, rng| loop {
                    let prompt = g.walk_from(rng.random_range(0..n), 3, rng);
                    let last = *prompt.last().unwrap();
                    if g.is_fact(last) {
                        break (format!("story {}", words(&prompt)), word(g.successors[last][0]));
                    }
                })?;
                Ok(UnlearningExample::new(
                    format!("utility-{i:03}"),
                    input,
                    output,
                    TASK_UTILITY,
                ))
            })
            .collect()
    }
}

/// Deterministic corpus for `(spec, seed)`.
pub fn generate_synthetic_corpus(spec: &CorpusSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grammar = Grammar::new(spec, &mut rng);
    let mut g = Generator {
        spec,
        grammar,
        rng,
        inputs: HashSet::new(),
        answers: HashSet::new(),
        people: 0,
    };
    let forget = g.split("forget", spec.forget)?;
    let retain = g.split("retain", spec.retain)?;
    let utility = g.utility(spec.utility)?;
    let mia_member: Vec<_> = forget[..spec.mia_member].to_vec();

    // Non-members mirror the task mix of the members they are compared to.
    let mut mia_nonmember = Vec::with_capacity(spec.mia_nonmember);
    for i in 0..spec.mia_nonmember {
        let kind = match mia_member[i % mia_member.len()].task.as_str() {
            TASK_PII_QA => Kind::Qa,
            TASK_DOCUMENT => Kind::Document,
            _ => Kind::Completion,
        };
        mia_nonmember.push(g.example(format!("nonmember-{i:03}"), kind)?);
    }
    Ok(SyntheticCorpus {
        split: SplitDataset::new(retain, forget)?,
        utility,
        mia_member,
        mia_nonmember,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_as_requested() {
        let c = generate_synthetic_corpus(&CorpusSpec::with_counts(32, 32, 64, 32, 32), 7).unwrap();
        assert_eq!(c.split.forget.len(), 32);
        assert_eq!(c.split.retain.len(), 32);
        assert_eq!(c.utility.len(), 64);
        assert_eq!(c.mia_member.len(), 32);
        assert_eq!(c.mia_nonmember.len(), 32);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = CorpusSpec::default();
        assert_eq!(
            generate_synthetic_corpus(&spec, 3).unwrap(),
            generate_synthetic_corpus(&spec, 3).unwrap()
        );
        assert_ne!(
            generate_synthetic_corpus(&spec, 3).unwrap(),
            generate_synthetic_corpus(&spec, 4).unwrap()
        );
    }

    #[test]
    fn zero_counts_rejected() {
        let spec = CorpusSpec::with_counts(0, 32, 64, 1, 1);
        assert!(matches!(
            generate_synthetic_corpus(&spec, 1),
            Err(Error::InvalidCorpusSpec(_))
        ));
        assert!(generate_synthetic_corpus(&CorpusSpec::with_counts(4, 4, 0, 1, 1), 1).is_err());
    }

    #[test]
    fn pii_answers_are_private() {
        let c = generate_synthetic_corpus(&CorpusSpec::default(), 11).unwrap();
        let everything: Vec<&UnlearningExample> = c.split.iter().chain(&c.utility).chain(&c.mia_nonmember).collect();
        for qa in everything.iter().filter(|e| e.task == TASK_PII_QA) {
            for other in everything.iter().filter(|e| e.id != qa.id) {
                assert!(
                    !other.output.split_whitespace().any(|w| w == qa.output),
                    "answer {} of {} leaks into {}",
                    qa.output,
                    qa.id,
                    other.id
                );
            }
        }
    }

    #[test]
    fn nonmembers_are_unseen() {
        let c = generate_synthetic_corpus(&CorpusSpec::default(), 5).unwrap();
        let train: HashSet<&str> = c.split.iter().map(|e| e.input.as_str()).collect();
        assert!(c.mia_nonmember.iter().all(|e| !train.contains(e.input.as_str())));
        assert!(c.utility.iter().all(|e| !train.contains(e.input.as_str())));
        for (m, f) in c.mia_member.iter().zip(&c.split.forget) {
            assert_eq!(m, f);
        }
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate_synthetic_corpus(&CorpusSpec::with_counts(6, 6, 4, 3, 3), 2).unwrap();
        c.write_dir(dir.path()).unwrap();
        assert_eq!(SyntheticCorpus::read_dir(dir.path()).unwrap(), c);
    }
}
