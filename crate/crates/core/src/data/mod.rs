//! Corpus records, tokenization, packing and batching.

mod batch;
mod example;
mod pack;
mod synth;
mod vocab;

pub use batch::{batches, gather, sequential_batches};
pub use example::{load_dataset, read_jsonl, save_dataset, write_jsonl, SplitDataset, TaskKind, UnlearningExample};
pub use pack::{pack, pack_all, PackedExample};
pub use synth::{
    generate_synthetic_corpus, CorpusSpec, SyntheticCorpus, TaskMix, FORGET_FILE, MIA_MEMBER_FILE, MIA_NONMEMBER_FILE,
    RETAIN_FILE, TASK_COMPLETION, TASK_DOCUMENT, TASK_PII_QA, TASK_UTILITY, UTILITY_FILE,
};
pub use vocab::{build_vocabulary, Vocabulary, EOS_ID, PAD_ID};

use crate::error::Result;

/// Retain and forget splits packed for one model's `max_length`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedSplit {
    pub retain: Vec<PackedExample>,
    pub forget: Vec<PackedExample>,
}

impl PackedSplit {
    pub fn new(dataset: &SplitDataset, vocab: &Vocabulary, max_length: usize) -> Result<Self> {
        Ok(PackedSplit {
            retain: pack_all(&dataset.retain, vocab, max_length)?,
            forget: pack_all(&dataset.forget, vocab, max_length)?,
        })
    }
}
