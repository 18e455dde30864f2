use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::LoraTarget;
use crate::diffcore::Tensor;

const DOWN_INIT_STD: f64 = 0.02;

/// Low-rank update `scaling · up · down` added to a frozen projection.
///
/// `down` is `r×d_in`, `up` is `d_out×r`. `up` starts at zero so a freshly
/// attached adapter leaves the model's outputs untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct LoraAdapter {
    pub layer: usize,
    pub target: LoraTarget,
    pub down: Tensor,
    pub up: Tensor,
    pub scaling: f64,
}

impl LoraAdapter {
    pub(crate) fn init(
        layer: usize,
        target: LoraTarget,
        d_in: usize,
        d_out: usize,
        rank: usize,
        scaling: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let normal = Normal::new(0.0, DOWN_INIT_STD).expect("valid std");
        let down = (0..rank * d_in).map(|_| normal.sample(rng)).collect();
        LoraAdapter {
            layer,
            target,
            down: Tensor::matrix(rank, d_in, down).expect("consistent shape"),
            up: Tensor::zeros(d_out, rank),
            scaling,
        }
    }

    pub fn name(&self) -> String {
        format!("layers.{}.attn.{}", self.layer, self.target.short())
    }

    pub fn rank(&self) -> usize {
        self.down.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.down.len() + self.up.len()
    }

    /// Dense `d_out×d_in` weight delta.
    pub fn delta(&self) -> Tensor {
        let (d_out, r, d_in) = (self.up.rows(), self.rank(), self.down.cols());
        let mut out = vec![0.0; d_out * d_in];
        for i in 0..d_out {
            for p in 0..r {
                let u = self.up.data()[i * r + p] * self.scaling;
                if u == 0.0 {
                    continue;
                }
                for j in 0..d_in {
                    out[i * d_in + j] += u * self.down.data()[p * d_in + j];
                }
            }
        }
        Tensor::matrix(d_out, d_in, out).expect("consistent shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_adapter_has_zero_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = LoraAdapter::init(0, LoraTarget::Query, 8, 8, 2, 1.0, &mut rng);
        assert!(a.delta().data().iter().all(|&v| v == 0.0));
        assert_eq!(a.parameter_count(), 2 * (8 + 8));
    }

    #[test]
    fn delta_rank_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = LoraAdapter::init(0, LoraTarget::Value, 6, 6, 1, 2.0, &mut rng);
        for (i, v) in a.up.data_mut().iter_mut().enumerate() {
            *v = i as f64 + 1.0;
        }
        // rank one: every 2x2 minor vanishes
        let d = a.delta();
        let m = |i: usize, j: usize| d.data()[i * 6 + j];
        for i in 0..5 {
            for j in 0..5 {
                let minor = m(i, j) * m(i + 1, j + 1) - m(i, j + 1) * m(i + 1, j);
                assert!(minor.abs() < 1e-12);
            }
        }
    }
}
