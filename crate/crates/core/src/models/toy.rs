//! Gamma likelihood with known shape and a gamma prior on the rate:
//! `beta ~ Gam(a0, b0)`, `x_n | beta ~ Gam(a, beta)`.
//!
//! The posterior and posterior predictive are closed-form, which makes this
//! model the exact reference for the Monte Carlo estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::{require_positive, GammaPrior, ModelError};
use crate::math::gamma_log_pdf;
use crate::model::{Model, PointwiseLikelihood};
use crate::transform::{ParamBlock, ParamLayout, Transform};

/// Posterior `(shape, rate)` = `(a0 + N a, b0 + sum x)`.
pub fn conjugate_gamma_posterior(data: &[f64], a0: f64, b0: f64, a: f64) -> Result<(f64, f64), ModelError> {
    require_positive("a0", a0)?;
    require_positive("b0", b0)?;
    require_positive("a", a)?;
    check_positive_data(data)?;
    Ok((a0 + data.len() as f64 * a, b0 + data.iter().sum::<f64>()))
}

fn check_positive_data(data: &[f64]) -> Result<(), ModelError> {
    match data.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(index) => Err(ModelError::NonPositiveData { index, value: data[index] }),
        None => Ok(()),
    }
}

/// `log int Gam(x; a, beta) Gam(beta; a', b') d beta`
/// `= log[ G(a'+a) / (G(a) G(a')) * b'^a' * x^(a-1) / (x + b')^(a'+a) ]`.
pub fn gamma_gamma_predictive_logpdf(x: f64, a: f64, post_shape: f64, post_rate: f64) -> f64 {
    ln_gamma(post_shape + a) - ln_gamma(a) - ln_gamma(post_shape) + post_shape * post_rate.ln() + (a - 1.0) * x.ln()
        - (post_shape + a) * (x + post_rate).ln()
}

/// Gamma likelihood of fixed points as a function of the rate `theta[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaLikelihood {
    pub points: Vec<f64>,
    pub shape: f64,
}

impl PointwiseLikelihood for GammaLikelihood {
    fn point_count(&self) -> usize {
        self.points.len()
    }

    fn pointwise_log_lik(&self, n: usize, theta: &[f64]) -> f64 {
        let beta = theta[0];
        if !(beta > 0.0) {
            return f64::NAN;
        }
        gamma_log_pdf(self.points[n], self.shape, beta)
    }

    fn datapoint_ids(&self) -> Vec<String> {
        let labels: Vec<String> = self.points.iter().map(|x| format!("x={x}")).collect();
        super::disambiguate(&labels)
    }
}

#[derive(Debug, Clone)]
pub struct GammaGammaToy {
    likelihood: GammaLikelihood,
    prior: GammaPrior,
    layout: ParamLayout,
}

impl GammaGammaToy {
    pub const SHAPE: f64 = 5.0;
    pub const PRIOR: GammaPrior = GammaPrior { shape: 1.0, rate: 1.0 };

    /// Shape 5, prior `Gam(1, 1)`.
    pub fn new(data: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_params(data, Self::SHAPE, Self::PRIOR)
    }

    pub fn with_params(data: Vec<f64>, shape: f64, prior: GammaPrior) -> Result<Self, ModelError> {
        require_positive("a", shape)?;
        require_positive("a0", prior.shape)?;
        require_positive("b0", prior.rate)?;
        check_positive_data(&data)?;
        Ok(Self {
            likelihood: GammaLikelihood { points: data, shape },
            prior,
            layout: ParamLayout::new(vec![ParamBlock::new("beta", Transform::Positive, 1)]),
        })
    }

    /// `n` draws from `Gam(5, 1)`.
    pub fn simulate(n: usize, seed: u64) -> Result<Self, ModelError> {
        Self::new(simulate_gamma(n, Self::SHAPE, 1.0, seed))
    }

    pub fn data(&self) -> &[f64] {
        &self.likelihood.points
    }

    pub fn shape(&self) -> f64 {
        self.likelihood.shape
    }

    pub fn prior(&self) -> GammaPrior {
        self.prior
    }

    pub fn posterior(&self) -> (f64, f64) {
        conjugate_gamma_posterior(self.data(), self.prior.shape, self.prior.rate, self.shape())
            .expect("validated at construction")
    }

    /// Closed-form `log p(x_new | data)`.
    pub fn posterior_predictive_logpdf(&self, x_new: f64) -> Result<f64, ModelError> {
        if !(x_new > 0.0 && x_new.is_finite()) {
            return Err(ModelError::NonPositiveData { index: 0, value: x_new });
        }
        let (a_post, b_post) = self.posterior();
        Ok(gamma_gamma_predictive_logpdf(x_new, self.shape(), a_post, b_post))
    }

    /// Mode of the posterior predictive density (0 when `a <= 1`).
    pub fn predictive_mode(&self) -> f64 {
        let (a_post, b_post) = self.posterior();
        ((self.shape() - 1.0) * b_post / (a_post + 1.0)).max(0.0)
    }

    /// The same likelihood evaluated at other points, for criticising new
    /// or hypothetical observations.
    pub fn likelihood_at(&self, points: Vec<f64>) -> GammaLikelihood {
        GammaLikelihood { points, shape: self.shape() }
    }
}

/// `n` seeded draws from `Gam(shape, rate)`.
pub fn simulate_gamma(n: usize, shape: f64, rate: f64, seed: u64) -> Vec<f64> {
    let dist = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

impl PointwiseLikelihood for GammaGammaToy {
    fn point_count(&self) -> usize {
        self.likelihood.point_count()
    }

    fn pointwise_log_lik(&self, n: usize, theta: &[f64]) -> f64 {
        self.likelihood.pointwise_log_lik(n, theta)
    }

    fn datapoint_ids(&self) -> Vec<String> {
        self.likelihood.datapoint_ids()
    }
}

impl Model for GammaGammaToy {
    fn name(&self) -> &str {
        "gamma-toy"
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        self.prior.log_pdf(theta[0])
    }

    fn prior_mean(&self) -> Vec<f64> {
        vec![self.prior.mean()]
    }

    /// Through the sufficient statistics `N`, `sum x`, `sum log x`.
    fn log_lik(&self, theta: &[f64]) -> f64 {
        let beta = theta[0];
        let a = self.shape();
        let n = self.data().len() as f64;
        let sum_x: f64 = self.data().iter().sum();
        let sum_log_x: f64 = self.data().iter().map(|x| x.ln()).sum();
        n * (a * beta.ln() - ln_gamma(a)) + (a - 1.0) * sum_log_x - beta * sum_x
    }
}
