use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SophiaParams {
    /// Probability of refreshing the curvature estimate on a given step.
    pub rho: f64,
    /// Curvature scale in the denominator `max(γ·h, ε)`.
    pub gamma: f64,
    pub epsilon: f64,
    /// Per-coordinate bound on the preconditioned step, before `η`.
    pub clip: f64,
    /// EMA memory of the curvature estimate.
    pub beta: f64,
}

impl SophiaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config("sophia_rho", "must lie in (0, 1]"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config("sophia_gamma", "must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("sophia_epsilon", "must be positive"));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(Error::config("sophia_clip", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config("sophia_beta", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Sophia optimizer state: a non-negative Hessian-diagonal estimate `h`
/// refreshed from squared gradients on a random subset of steps.
#[derive(Clone, Debug)]
pub struct SophiaState {
    pub params: SophiaParams,
    h: Vec<f64>,
    step: u64,
    refreshes: u64,
    rng: ChaCha8Rng,
}

impl SophiaState {
    pub fn new(dim: usize, params: SophiaParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x50f1a);
        Ok(SophiaState {
            params,
            h: vec![0.0; dim],
            step: 0,
            refreshes: 0,
            rng,
        })
    }

    pub fn with_hessian(mut self, h: Vec<f64>) -> Result<Self> {
        if h.len() != self.h.len() {
            return Err(Error::LengthMismatch {
                expected: self.h.len(),
                actual: h.len(),
            });
        }
        if h.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::arg("h", "entries must be non-negative"));
        }
        self.h = h;
        Ok(self)
    }

    pub fn hessian(&self) -> &[f64] {
        &self.h
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Number of steps on which the curvature estimate was refreshed.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    fn check(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.h.len() {
            return Err(Error::LengthMismatch {
                expected: self.h.len(),
                actual: g.len(),
            });
        }
        Ok(())
    }

    /// One Bernoulli(ρ) draw; on success `h ← β·h + (1−β)·g²`. The step
    /// counter advances either way. Returns whether `h` was refreshed.
    pub fn update_hessian(&mut self, g: &[f64]) -> Result<bool> {
        self.check(g)?;
        self.step += 1;
        let refresh = self.rng.random::<f64>() < self.params.rho;
        if refresh {
            let beta = self.params.beta;
            for (h, &gi) in self.h.iter_mut().zip(g) {
                *h = beta * *h + (1.0 - beta) * gi * gi;
            }
            self.refreshes += 1;
        }
        Ok(refresh)
    }

    /// `clamp(g_i / max(γ·h_i, ε), −clip, clip)` at the current `h`.
    pub fn direction(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check(g)?;
        let p = &self.params;
        Ok(g.iter()
            .zip(&self.h)
            .map(|(&gi, &hi)| (gi / (p.gamma * hi).max(p.epsilon)).clamp(-p.clip, p.clip))
            .collect())
    }

    /// Refresh `h` (ρ-gated), then `θ_i ← θ_i − η · clipped_i`. Returns
    /// the largest per-coordinate change.
    pub fn step(&mut self, theta: &mut [f64], g: &[f64], eta: f64) -> Result<f64> {
        if theta.len() != g.len() {
            return Err(Error::LengthMismatch {
                expected: theta.len(),
                actual: g.len(),
            });
        }
        self.update_hessian(g)?;
        let dir = self.direction(g)?;
        let mut max_delta: f64 = 0.0;
        for (t, d) in theta.iter_mut().zip(dir) {
            let delta = eta * d;
            *t -= delta;
            max_delta = max_delta.max(delta.abs());
        }
        Ok(max_delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho: f64, beta: f64) -> SophiaParams {
        SophiaParams {
            rho,
            gamma: 1.2,
            epsilon: 1e-8,
            clip: 1.0,
            beta,
        }
    }

    #[test]
    fn degenerate_ema_takes_square() {
        let mut s = SophiaState::new(1, params(1.0, 0.0), 0).unwrap();
        assert!(s.update_hessian(&[3.0]).unwrap());
        assert_eq!(s.hessian(), &[9.0]);
    }

    #[test]
    fn ema_decays() {
        let mut s = SophiaState::new(1, params(1.0, 0.99), 0)
            .unwrap()
            .with_hessian(vec![1.0])
            .unwrap();
        s.update_hessian(&[0.0]).unwrap();
        assert_eq!(s.hessian(), &[0.99]);
    }

    #[test]
    fn floor_case_gives_unit_step() {
        let mut s = SophiaState::new(1, params(1.0, 0.99), 0).unwrap();
        let mut theta = [0.0];
        s.step(&mut theta, &[1e-8], 0.1).unwrap();
        assert!((theta[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn clip_engages() {
        let mut s = SophiaState::new(1, params(0.5, 0.99), 3).unwrap();
        let mut theta = [0.0];
        s.step(&mut theta, &[10.0], 0.1).unwrap();
        assert_eq!(theta[0], -0.1);
    }

    #[test]
    fn gamma_ratio_law() {
        let h = vec![2.0, 0.5];
        let g = [0.3, -0.2];
        let mk = |gamma: f64| {
            let mut p = params(1.0, 0.99);
            p.gamma = gamma;
            p.clip = 1e9;
            SophiaState::new(2, p, 0).unwrap().with_hessian(h.clone()).unwrap()
        };
        let a = mk(1.2).direction(&g).unwrap();
        let b = mk(1.1).direction(&g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x / y - 1.1 / 1.2).abs() < 1e-14);
        }
    }

    #[test]
    fn refresh_count_is_binomial() {
        let mut s = SophiaState::new(2, params(0.1, 0.99), 42).unwrap();
        for _ in 0..1000 {
            s.update_hessian(&[1.0, 2.0]).unwrap();
        }
        assert_eq!(s.steps(), 1000);
        assert!((70..=130).contains(&s.refreshes()), "{}", s.refreshes());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SophiaState::new(1, params(0.0, 0.9), 0).is_err());
        let mut p = params(0.5, 0.9);
        p.epsilon = 0.0;
        assert!(SophiaState::new(1, p, 0).is_err());
    }
}
