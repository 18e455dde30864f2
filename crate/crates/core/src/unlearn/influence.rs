use super::fisher::FisherDiagonal;
use super::gradient::batch_gradient;
use crate::data::PackedExample;
use crate::error::{Error, Result};
use crate::model::{mean_of, Model, ParameterVector};

/// Per-coordinate step weights `w_i = 1 / (F_i + λ)`.
///
/// Coordinates the retain set depends on (large `F_i`) get small weights;
/// the damping `λ` bounds every weight by `1/λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluencePlan {
    pub weights: Vec<f64>,
    pub damping: f64,
}

pub fn influence_weights(fisher: &FisherDiagonal, damping: f64) -> Result<InfluencePlan> {
    if !(damping.is_finite() && damping > 0.0) {
        return Err(Error::arg("damping", format!("must be a positive real, got {damping}")));
    }
    Ok(InfluencePlan {
        weights: fisher.iter().map(|&f| 1.0 / (f + damping)).collect(),
        damping,
    })
}

/// Arithmetic mean of per-batch gradients with an arbitrary evaluator.
pub fn mean_gradient_with<B, F>(batches: &[B], mut gradient: F) -> Result<ParameterVector>
where
    F: FnMut(&B) -> Result<ParameterVector>,
{
    if batches.is_empty() {
        return Err(Error::NoBatches("mean gradient"));
    }
    let grads = batches.iter().map(&mut gradient).collect::<Result<Vec<_>>>()?;
    mean_of(&grads)
}

/// Mean over forget batches of the forget-loss gradient. The model is only
/// read.
pub fn mean_forget_gradient(model: &Model, forget_batches: &[Vec<&PackedExample>]) -> Result<ParameterVector> {
    mean_gradient_with(forget_batches, |b| Ok(batch_gradient(model, b)?.1))
}

/// `θ'_i = θ_i − η · w_i · g_i`
pub fn influence_update(
    theta: &ParameterVector,
    weights: &[f64],
    gradient: &[f64],
    eta: f64,
) -> Result<ParameterVector> {
    theta.check_len(weights)?;
    theta.check_len(gradient)?;
    let values = theta
        .iter()
        .zip(weights)
        .zip(gradient)
        .map(|((t, w), g)| t - eta * w * g)
        .collect();
    theta.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fisher(v: Vec<f64>) -> FisherDiagonal {
        FisherDiagonal::from_batch_gradients(&[ParameterVector::from_values(v.iter().map(|x| x.sqrt()).collect())])
            .unwrap()
    }

    #[test]
    fn zero_fisher_gives_inverse_damping() {
        let plan = influence_weights(&fisher(vec![0.0]), 1e-3).unwrap();
        assert_eq!(plan.weights, vec![1000.0]);
    }

    #[test]
    fn direct_evaluation() {
        let plan = influence_weights(&fisher(vec![4.0]), 1e-3).unwrap();
        assert_eq!(plan.weights[0], 1.0 / 4.001);
        assert!((plan.weights[0] - 0.24994).abs() < 1e-5);
    }

    #[test]
    fn non_positive_damping_rejected() {
        assert!(influence_weights(&fisher(vec![1.0]), 0.0).is_err());
        assert!(influence_weights(&fisher(vec![1.0]), -1.0).is_err());
    }

    #[test]
    fn update_arithmetic() {
        let theta = ParameterVector::from_values(vec![1.0]);
        let out = influence_update(&theta, &[0.5], &[2.0], 0.1).unwrap();
        assert!((out[0] - 0.9).abs() < 1e-15);
        let same = influence_update(&theta, &[0.5], &[0.0], 0.1).unwrap();
        assert_eq!(same, theta);
        assert!(influence_update(&theta, &[0.5, 1.0], &[0.0], 0.1).is_err());
    }

    #[test]
    fn retain_critical_coordinate_moves_least() {
        // coordinate 1 carries most retain importance
        let f = fisher(vec![0.01, 25.0, 0.2]);
        let plan = influence_weights(&f, 1e-3).unwrap();
        let theta = ParameterVector::from_values(vec![0.3, -0.2, 0.7]);
        let g = [1.0, 1.0, -1.0];
        let out = influence_update(&theta, &plan.weights, &g, 0.05).unwrap();
        let deltas: Vec<f64> = out.iter().zip(theta.iter()).map(|(a, b)| (a - b).abs()).collect();
        assert!(deltas[1] < deltas[0] && deltas[1] < deltas[2]);
    }

    proptest! {
        #[test]
        fn weights_law_and_monotone(fs in proptest::collection::vec(0.0f64..100.0, 2..20), damping in 1e-6f64..1.0) {
            let f = fisher(fs);
            let plan = influence_weights(&f, damping).unwrap();
            for (i, &w) in plan.weights.iter().enumerate() {
                prop_assert_eq!(w, 1.0 / (f[i] + damping));
                prop_assert!(w > 0.0 && w <= 1.0 / damping);
                for (j, &wj) in plan.weights.iter().enumerate() {
                    // strict whenever the damped denominators are distinct doubles
                    if f[i] + damping > f[j] + damping {
                        prop_assert!(w < wj);
                    }
                }
            }
        }
    }
}
