//! Gradient oracles: exact, synthetically noisy, and minibatch-subsampled
//! posterior gradients. Samplers only see the [`GradientOracle`] trait, so a
//! toy potential and a Bayesian model run through the same update code.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::potentials::Potential;

/// One oracle call: an estimate G of ∇U(θ) and an estimate Ũ of U(θ),
/// both at the query point (pre-step).
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    pub potential: f64,
}

/// A stochastic (or exact) source of gradient estimates. `estimate` takes
/// `&mut self` so oracles may carry state (epoch cursors, caches), and draws
/// any randomness from the rng handed in by the chain driver.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    fn estimate(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) -> GradientEstimate;
}

/// Noise-free oracle over an analytic potential.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    pub potential: Potential,
}

impl ExactOracle {
    pub fn new(potential: Potential) -> Self {
        Self { potential }
    }
}

impl GradientOracle for ExactOracle {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn estimate(&mut self, theta: &[f64], _rng: &mut ChaCha8Rng) -> GradientEstimate {
        GradientEstimate {
            grad: self.potential.grad(theta),
            potential: self.potential.value(theta),
        }
    }
}

/// Exact gradient plus isotropic Gaussian noise scaled to satisfy
/// `E‖G − ∇U‖² = σ²·(1 + ‖θ‖²)`, the growth bound that stochastic-gradient
/// convergence arguments assume. Each coordinate gets
/// `σ·√((1 + ‖θ‖²)/dim)·z` with independent standard normals z.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    pub potential: Potential,
    pub sigma: f64,
}

impl NoisyOracle {
    pub fn new(potential: Potential, sigma: f64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite());
        Self { potential, sigma }
    }
}

impl GradientOracle for NoisyOracle {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn estimate(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) -> GradientEstimate {
        let mut grad = self.potential.grad(theta);
        let norm_sq: f64 = theta.iter().map(|t| t * t).sum();
        let scale = self.sigma * ((1.0 + norm_sq) / theta.len() as f64).sqrt();
        for g in &mut grad {
            let z: f64 = StandardNormal.sample(rng);
            *g += scale * z;
        }
        GradientEstimate {
            grad,
            potential: self.potential.value(theta),
        }
    }
}

/// A likelihood-and-prior model that can evaluate minus-log terms on an
/// index subset of its dataset. Implementations return sums over the given
/// indices (not means); the posterior oracle applies the N/B rescale.
pub trait BatchModel {
    fn dim(&self) -> usize;
    /// Dataset size N.
    fn n(&self) -> usize;
    /// `(Σᵢ −log p(dᵢ|θ), Σᵢ ∇_θ(−log p(dᵢ|θ)))` over `indices`.
    fn minus_log_lik_grad(&self, theta: &[f64], indices: &[usize]) -> (f64, Vec<f64>);
    /// `(−log p(θ), ∇_θ(−log p(θ)))`.
    fn minus_log_prior_grad(&self, theta: &[f64]) -> (f64, Vec<f64>);
}

/// Draws `batch_size` distinct indices uniformly from `0..n`.
pub fn draw_batch_indices(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(
        batch_size >= 1 && batch_size <= n,
        "batch size {batch_size} must lie in 1..={n}"
    );
    rand::seq::index::sample(rng, n, batch_size).into_vec()
}

/// Unbiased minibatch estimate of the posterior potential
/// `U(θ) = −log p(D|θ) − log p(θ)` and its gradient:
/// a fresh without-replacement batch per call, likelihood terms rescaled by
/// N/B, prior terms exact. `batch_size = N` short-circuits the index draw
/// and sums the full dataset in order.
pub struct PosteriorTarget<Mo: BatchModel> {
    pub model: Mo,
    pub batch_size: usize,
}

impl<Mo: BatchModel> PosteriorTarget<Mo> {
    pub fn new(model: Mo, batch_size: usize) -> Self {
        assert!(
            batch_size >= 1 && batch_size <= model.n(),
            "batch size {batch_size} must lie in 1..={}",
            model.n()
        );
        Self { model, batch_size }
    }
}

impl<Mo: BatchModel> GradientOracle for PosteriorTarget<Mo> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn estimate(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) -> GradientEstimate {
        let n = self.model.n();
        let (lik_value, lik_grad) = if self.batch_size == n {
            let all: Vec<usize> = (0..n).collect();
            self.model.minus_log_lik_grad(theta, &all)
        } else {
            let indices = draw_batch_indices(n, self.batch_size, rng);
            self.model.minus_log_lik_grad(theta, &indices)
        };
        let scale = n as f64 / self.batch_size as f64;
        let (prior_value, prior_grad) = self.model.minus_log_prior_grad(theta);
        let grad = lik_grad
            .iter()
            .zip(&prior_grad)
            .map(|(l, p)| scale * l + p)
            .collect();
        GradientEstimate {
            grad,
            potential: scale * lik_value + prior_value,
        }
    }
}

/// Gaussian location model for oracle tests: dᵢ ~ N(θ, I), θ ~ N(0, σ_p²·I).
/// The posterior is Gaussian with precision `n + 1/σ_p²` per coordinate, so
/// minibatch estimates can be checked against closed forms.
#[derive(Debug, Clone)]
pub struct ToyGaussianModel {
    pub data: Vec<Vec<f64>>,
    pub prior_sigma: f64,
}

impl ToyGaussianModel {
    pub fn new(data: Vec<Vec<f64>>, prior_sigma: f64) -> Self {
        assert!(!data.is_empty());
        let dim = data[0].len();
        assert!(data.iter().all(|d| d.len() == dim));
        assert!(prior_sigma > 0.0);
        Self { data, prior_sigma }
    }

    /// Posterior mean and variance (per coordinate, the same for all).
    pub fn posterior_moments(&self) -> (Vec<f64>, f64) {
        let n = self.data.len() as f64;
        let dim = self.data[0].len();
        let precision = n + 1.0 / (self.prior_sigma * self.prior_sigma);
        let mean = (0..dim)
            .map(|j| self.data.iter().map(|d| d[j]).sum::<f64>() / precision)
            .collect();
        (mean, 1.0 / precision)
    }
}

impl BatchModel for ToyGaussianModel {
    fn dim(&self) -> usize {
        self.data[0].len()
    }

    fn n(&self) -> usize {
        self.data.len()
    }

    fn minus_log_lik_grad(&self, theta: &[f64], indices: &[usize]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for &i in indices {
            for (j, g) in grad.iter_mut().enumerate() {
                let r = theta[j] - self.data[i][j];
                value += 0.5 * r * r;
                *g += r;
            }
        }
        (value, grad)
    }

    fn minus_log_prior_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let var = self.prior_sigma * self.prior_sigma;
        let value = theta.iter().map(|t| t * t).sum::<f64>() / (2.0 * var);
        let grad = theta.iter().map(|t| t / var).collect();
        (value, grad)
    }
}
