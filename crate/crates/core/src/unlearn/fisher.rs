use std::ops::Deref;

use super::gradient::batch_gradient;
use crate::data::PackedExample;
use crate::error::{Error, Result};
use crate::model::{Model, ParameterVector};

/// Diagonal Fisher estimate: per-coordinate mean of squared retain-batch
/// gradients. Every entry is non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherDiagonal(ParameterVector);

impl FisherDiagonal {
    /// Mean over batches of the element-wise squared batch gradient.
    pub fn from_batch_gradients(gradients: &[ParameterVector]) -> Result<Self> {
        let first = gradients.first().ok_or(Error::NoBatches("Fisher estimation"))?;
        let mut acc = first.zeros_like();
        for g in gradients {
            acc.check_len(g)?;
            for (a, v) in acc.iter_mut().zip(g.iter()) {
                *a += v * v;
            }
        }
        acc.scale(1.0 / gradients.len() as f64);
        Ok(FisherDiagonal(acc))
    }

    pub fn into_inner(self) -> ParameterVector {
        self.0
    }
}

impl Deref for FisherDiagonal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Fisher diagonal over `batches` with gradients from an arbitrary
/// per-batch evaluator.
pub fn estimate_fisher_diagonal_with<B, F>(batches: &[B], mut gradient: F) -> Result<FisherDiagonal>
where
    F: FnMut(&B) -> Result<ParameterVector>,
{
    if batches.is_empty() {
        return Err(Error::NoBatches("Fisher estimation"));
    }
    let grads = batches.iter().map(&mut gradient).collect::<Result<Vec<_>>>()?;
    FisherDiagonal::from_batch_gradients(&grads)
}

/// Fisher diagonal of the model's trainable parameters over retain batches.
/// The model is only read.
pub fn estimate_fisher_diagonal(model: &Model, retain_batches: &[Vec<&PackedExample>]) -> Result<FisherDiagonal> {
    estimate_fisher_diagonal_with(retain_batches, |b| Ok(batch_gradient(model, b)?.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_batch_is_square() {
        let g = ParameterVector::from_values(vec![1.5, -2.0, 0.0]);
        let f = FisherDiagonal::from_batch_gradients(&[g]).unwrap();
        assert_eq!(&*f, &[2.25, 4.0, 0.0]);
    }

    #[test]
    fn sign_is_ignored() {
        let g = ParameterVector::from_values(vec![3.0, -0.5]);
        let mut neg = g.clone();
        neg.scale(-1.0);
        let f = FisherDiagonal::from_batch_gradients(&[g, neg]).unwrap();
        assert_eq!(&*f, &[9.0, 0.25]);
    }

    #[test]
    fn zero_batches_rejected() {
        let empty: [u8; 0] = [];
        assert!(matches!(
            estimate_fisher_diagonal_with(&empty, |_| unreachable!()),
            Err(Error::NoBatches(_))
        ));
    }
}
