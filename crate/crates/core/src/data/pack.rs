use super::example::UnlearningExample;
use super::vocab::{Vocabulary, EOS_ID, PAD_ID};
use crate::error::{Error, Result};

/// Fixed-length training view of one example.
///
/// Layout: input tokens, output tokens, end-of-sequence, truncated on the
/// right to `max_length` and then padded. The loss mask covers the output
/// tokens and the end-of-sequence marker that survive truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedExample {
    pub token_ids: Vec<u32>,
    pub loss_mask: Vec<bool>,
    pub attention_length: usize,
}

impl PackedExample {
    pub fn loss_positions(&self) -> usize {
        self.loss_mask.iter().filter(|&&m| m).count()
    }
}

pub fn pack(example: &UnlearningExample, vocab: &Vocabulary, max_length: usize) -> Result<PackedExample> {
    let input = vocab.encode(&example.input)?;
    let output = vocab.encode(&example.output)?;
    if input.is_empty() {
        return Err(Error::EmptySequence);
    }
    if input.len() >= max_length {
        return Err(Error::InputTooLong {
            input_len: input.len(),
            max_length,
        });
    }
    let mut token_ids = Vec::with_capacity(max_length);
    let mut loss_mask = Vec::with_capacity(max_length);
    token_ids.extend_from_slice(&input);
    loss_mask.resize(input.len(), false);
    for &t in output.iter().chain(std::iter::once(&EOS_ID)) {
        if token_ids.len() == max_length {
            break;
        }
        token_ids.push(t);
        loss_mask.push(true);
    }
    let attention_length = token_ids.len();
    token_ids.resize(max_length, PAD_ID);
    loss_mask.resize(max_length, false);
    Ok(PackedExample {
        token_ids,
        loss_mask,
        attention_length,
    })
}

pub fn pack_all(examples: &[UnlearningExample], vocab: &Vocabulary, max_length: usize) -> Result<Vec<PackedExample>> {
    examples.iter().map(|e| pack(e, vocab, max_length)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::example::SplitDataset;
    use crate::data::vocab::build_vocabulary;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        let d = SplitDataset::new(vec![UnlearningExample::new("1", "a b", "c d e f g", "t")], vec![]).unwrap();
        build_vocabulary(&d).unwrap()
    }

    #[test]
    fn layout_by_definition() {
        let v = vocab();
        let p = pack(&UnlearningExample::new("x", "a b", "c", "t"), &v, 6).unwrap();
        let (a, b, c) = (v.id("a").unwrap(), v.id("b").unwrap(), v.id("c").unwrap());
        assert_eq!(p.token_ids, vec![a, b, c, EOS_ID, PAD_ID, PAD_ID]);
        assert_eq!(p.loss_mask, vec![false, false, true, true, false, false]);
        assert_eq!(p.attention_length, 4);
    }

    #[test]
    fn exact_fit_has_full_attention() {
        let v = vocab();
        let p = pack(&UnlearningExample::new("x", "a b", "c d", "t"), &v, 5).unwrap();
        assert_eq!(p.attention_length, 5);
        assert_eq!(*p.token_ids.last().unwrap(), EOS_ID);
    }

    #[test]
    fn truncation_drops_trailing_output_only() {
        let v = vocab();
        let p = pack(&UnlearningExample::new("x", "a b", "c d e f g", "t"), &v, 4).unwrap();
        let ids: Vec<u32> = ["a", "b", "c", "d"].iter().map(|w| v.id(w).unwrap()).collect();
        assert_eq!(p.token_ids, ids);
        assert_eq!(p.loss_mask, vec![false, false, true, true]);
    }

    #[test]
    fn overlong_input_rejected() {
        let v = vocab();
        assert!(matches!(
            pack(&UnlearningExample::new("x", "a b c", "d", "t"), &v, 3),
            Err(Error::InputTooLong { .. })
        ));
    }

    proptest! {
        #[test]
        fn packed_invariants(input_len in 1usize..6, output_len in 0usize..6, max_length in 2usize..12) {
            let words = ["a", "b", "c", "d", "e", "f", "g"];
            let input = words[..input_len].join(" ");
            let output = words[..output_len].join(" ");
            let e = UnlearningExample::new("x", input, output, "t");
            let v = vocab();
            match pack(&e, &v, max_length) {
                Ok(p) => {
                    prop_assert_eq!(p.token_ids.len(), max_length);
                    prop_assert_eq!(p.loss_mask.len(), max_length);
                    prop_assert!(p.loss_positions() >= 1);
                    prop_assert!(p.loss_mask[..input_len].iter().all(|m| !m));
                    prop_assert!(p.loss_mask[p.attention_length..].iter().all(|m| !m));
                    prop_assert_eq!(pack(&e, &v, max_length).unwrap(), p);
                }
                Err(_) => prop_assert!(input_len >= max_length),
            }
        }
    }
}
