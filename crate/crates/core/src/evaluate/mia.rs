use crate::data::PackedExample;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::parallel::{map_ordered, Execution};

/// Probability that a random non-member scores strictly higher than a
/// random member, ties counting one half. Exhaustive over all pairs.
pub fn pairwise_auc(member_scores: &[f64], nonmember_scores: &[f64]) -> Result<f64> {
    if member_scores.is_empty() {
        return Err(Error::arg("member_set", "must be non-empty"));
    }
    if nonmember_scores.is_empty() {
        return Err(Error::arg("nonmember_set", "must be non-empty"));
    }
    let mut favorable = 0.0;
    for &n in nonmember_scores {
        for &m in member_scores {
            if n > m {
                favorable += 1.0;
            } else if n == m {
                favorable += 0.5;
            }
        }
    }
    Ok(favorable / (member_scores.len() * nonmember_scores.len()) as f64)
}

/// `(AUC − 0.5) / 0.5`: 0 when members and non-members are
/// indistinguishable, +1 when every member has lower loss than every
/// non-member, −1 for the reverse.
pub fn mia_from_scores(member_scores: &[f64], nonmember_scores: &[f64]) -> Result<f64> {
    Ok((pairwise_auc(member_scores, nonmember_scores)? - 0.5) / 0.5)
}

/// Membership score with a pluggable per-example statistic (higher means
/// "less likely seen").
pub fn mia_score_with<F>(members: &[PackedExample], nonmembers: &[PackedExample], score: F) -> Result<f64>
where
    F: Fn(&PackedExample) -> Result<f64> + Sync + Send,
{
    if members.is_empty() {
        return Err(Error::arg("member_set", "must be non-empty"));
    }
    if nonmembers.is_empty() {
        return Err(Error::arg("nonmember_set", "must be non-empty"));
    }
    let exec = Execution::default();
    let m = map_ordered(exec, members, &score)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = map_ordered(exec, nonmembers, &score)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    mia_from_scores(&m, &n)
}

/// Membership score using the plain sequence loss.
pub fn mia_score(model: &Model, members: &[PackedExample], nonmembers: &[PackedExample]) -> Result<f64> {
    mia_score_with(members, nonmembers, |p| model.sequence_loss(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_score_zero() {
        let s = [0.3, 1.2, 2.0];
        assert_eq!(mia_from_scores(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(mia_from_scores(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mia_from_scores(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn exhaustive_pair_count() {
        // pairs (n, m): (2,1) (2,3) (4,1) (4,3) → 3 of 4 favorable
        assert_eq!(pairwise_auc(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.75);
        assert_eq!(mia_from_scores(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.5);
    }

    #[test]
    fn empty_sets_rejected() {
        assert!(mia_from_scores(&[], &[1.0]).is_err());
        assert!(mia_from_scores(&[1.0], &[]).is_err());
    }
}
