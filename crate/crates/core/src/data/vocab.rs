use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::example::{SplitDataset, UnlearningExample};
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
const PAD: &str = "<pad>";
const EOS: &str = "<eos>";

/// Whitespace-token vocabulary. Ids 0 and 1 are reserved for padding and
/// end-of-sequence; corpus tokens are numbered from 2 in lexicographic
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a UnlearningExample>) -> Result<Self> {
        let mut words = BTreeSet::new();
        let mut any = false;
        for e in examples {
            any = true;
            words.extend(e.input.split_whitespace().map(str::to_owned));
            words.extend(e.output.split_whitespace().map(str::to_owned));
        }
        if !any {
            return Err(Error::EmptyDataset);
        }
        let mut tokens = vec![PAD.to_string(), EOS.to_string()];
        tokens.extend(words);
        Ok(Vocabulary::from(tokens))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace()
            .map(|w| self.id(w).ok_or_else(|| Error::UnknownToken(w.to_string())))
            .collect()
    }

    /// Space-joined tokens; reserved ids render as `<pad>` / `<eos>`.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Vocabulary over every input and output string of both splits.
pub fn build_vocabulary(dataset: &SplitDataset) -> Result<Vocabulary> {
    Vocabulary::from_examples(dataset.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_enumeration_from_two() {
        let d = SplitDataset::new(
            vec![UnlearningExample::new("1", "a", "b", "t")],
            vec![UnlearningExample::new("2", "b", "c", "t")],
        )
        .unwrap();
        let v = build_vocabulary(&d).unwrap();
        assert_eq!(v.id("a"), Some(2));
        assert_eq!(v.id("b"), Some(3));
        assert_eq!(v.id("c"), Some(4));
        assert_eq!(v.len(), 5);
        assert_eq!(build_vocabulary(&d).unwrap(), v);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            build_vocabulary(&SplitDataset::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn reserved_names_are_not_indexed() {
        let d = SplitDataset::new(vec![UnlearningExample::new("1", "x", "y", "t")], vec![]).unwrap();
        let v = build_vocabulary(&d).unwrap();
        assert_eq!(v.id("<pad>"), None);
        assert_eq!(v.decode(&[0, 1, 2]), "<pad> <eos> x");
    }

    #[test]
    fn serde_round_trip() {
        let d = SplitDataset::new(vec![UnlearningExample::new("1", "x z", "y", "t")], vec![]).unwrap();
        let v = build_vocabulary(&d).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
