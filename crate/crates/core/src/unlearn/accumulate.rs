use super::gradient::batch_gradient;
use crate::data::PackedExample;
use crate::error::{Error, Result};
use crate::model::{Model, ParameterVector};

/// Collects micro-batch gradients and releases their mean every `k`
/// pushes. Nothing is applied to the parameters in between.
#[derive(Debug)]
pub struct GradientAccumulator {
    k: usize,
    sum: Option<ParameterVector>,
    count: usize,
}

/// Mean gradient of one accumulation group and how many micro-batches it
/// actually covered (less than `k` only for a trailing remainder).
#[derive(Clone, Debug, PartialEq)]
pub struct AccumulatedGradient {
    pub gradient: ParameterVector,
    pub effective_k: usize,
}

impl GradientAccumulator {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::arg("accumulation_steps", "must be at least 1"));
        }
        Ok(GradientAccumulator { k, sum: None, count: 0 })
    }

    pub fn pending(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, gradient: &ParameterVector) -> Result<Option<AccumulatedGradient>> {
        match &mut self.sum {
            Some(s) => s.add_scaled(1.0, gradient)?,
            None => self.sum = Some(gradient.clone()),
        }
        self.count += 1;
        if self.count == self.k {
            Ok(self.flush())
        } else {
            Ok(None)
        }
    }

    /// Release whatever is pending as a (possibly partial) group.
    pub fn flush(&mut self) -> Option<AccumulatedGradient> {
        let mut sum = self.sum.take()?;
        let n = std::mem::take(&mut self.count);
        sum.scale(1.0 / n as f64);
        Some(AccumulatedGradient {
            gradient: sum,
            effective_k: n,
        })
    }
}

/// Mean gradients of consecutive groups of `k` micro-batches; a trailing
/// group with fewer than `k` micro-batches reports its effective size.
pub fn accumulate_gradients(
    model: &Model,
    micro_batches: &[Vec<&PackedExample>],
    k: usize,
) -> Result<Vec<AccumulatedGradient>> {
    let mut acc = GradientAccumulator::new(k)?;
    let mut out = Vec::new();
    for b in micro_batches {
        let (_, g) = batch_gradient(model, b)?;
        if let Some(group) = acc.push(&g)? {
            out.push(group);
        }
    }
    out.extend(acc.flush());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn releases_every_k() {
        let mut acc = GradientAccumulator::new(2).unwrap();
        let a = ParameterVector::from_values(vec![1.0, 2.0]);
        let b = ParameterVector::from_values(vec![3.0, 6.0]);
        assert!(acc.push(&a).unwrap().is_none());
        let g = acc.push(&b).unwrap().unwrap();
        assert_eq!(&*g.gradient, &[2.0, 4.0]);
        assert_eq!(g.effective_k, 2);
        assert!(acc.flush().is_none());
    }

    #[test]
    fn remainder_reports_effective_k() {
        let mut acc = GradientAccumulator::new(4).unwrap();
        acc.push(&ParameterVector::from_values(vec![1.0])).unwrap();
        let g = acc.flush().unwrap();
        assert_eq!(g.effective_k, 1);
        assert_eq!(&*g.gradient, &[1.0]);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(GradientAccumulator::new(0).is_err());
    }
}
