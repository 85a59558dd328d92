//! The interface samplers and estimators need from a model.

use thiserror::Error;

use crate::pdi::{LogLikMatrix, PdiError, ZeroLikelihood};
use crate::sampler::PosteriorDraws;
use crate::transform::ParamLayout;

/// Anything that assigns a log-likelihood to each of `N` datapoints given a
/// constrained parameter vector.
pub trait PointwiseLikelihood: Send + Sync {
    fn point_count(&self) -> usize;

    fn pointwise_log_lik(&self, n: usize, theta: &[f64]) -> f64;

    fn datapoint_ids(&self) -> Vec<String> {
        (1..=self.point_count()).map(|n| n.to_string()).collect()
    }
}

/// A Bayesian model over a constrained parameter vector laid out by
/// [`ParamLayout`].
pub trait Model: PointwiseLikelihood {
    fn name(&self) -> &str;

    fn layout(&self) -> &ParamLayout;

    /// Log prior density at a constrained point, up to a constant.
    fn log_prior(&self, theta: &[f64]) -> f64;

    /// Prior mean in constrained space; the sampler starts here.
    fn prior_mean(&self) -> Vec<f64>;

    /// Total log-likelihood of the dataset. Models with a cheaper route
    /// (sufficient statistics) override this; the sum over
    /// [`PointwiseLikelihood::pointwise_log_lik`] must agree with it.
    fn log_lik(&self, theta: &[f64]) -> f64 {
        (0..self.point_count()).map(|n| self.pointwise_log_lik(n, theta)).sum()
    }

    fn log_joint(&self, theta: &[f64]) -> f64 {
        let prior = self.log_prior(theta);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        prior + self.log_lik(theta)
    }

    /// Put a draw into a canonical labelling (e.g. sort mixture
    /// components). Must leave every pointwise log-likelihood unchanged.
    fn canonicalize(&self, _theta: &mut [f64]) {}

    /// Relabel a whole sample. The default canonicalizes each draw; models
    /// whose labelling depends on the sample as a whole override this.
    fn relabel(&self, draws: &mut [Vec<f64>]) {
        for theta in draws {
            self.canonicalize(theta);
        }
    }
}

/// `log_joint` at the constrained image of `z`, plus the log-Jacobian.
pub fn log_density_unconstrained<M: Model + ?Sized>(model: &M, z: &[f64]) -> f64 {
    let (theta, log_jac) = model.layout().constrain(z);
    model.log_joint(&theta) + log_jac
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("log-likelihood is {value} at draw {draw}, datapoint {point}")]
    NonFinite { draw: usize, point: usize, value: f64 },
    #[error(transparent)]
    Pdi(#[from] PdiError),
}

/// Evaluate every datapoint under every draw.
pub fn loglik_matrix<L: PointwiseLikelihood + ?Sized>(
    lik: &L,
    draws: &PosteriorDraws,
) -> Result<LogLikMatrix, MatrixError> {
    loglik_matrix_with(lik, draws, ZeroLikelihood::Reject)
}

pub fn loglik_matrix_with<L: PointwiseLikelihood + ?Sized>(
    lik: &L,
    draws: &PosteriorDraws,
    zero_likelihood: ZeroLikelihood,
) -> Result<LogLikMatrix, MatrixError> {
    let points = lik.point_count();
    let mut columns = vec![Vec::with_capacity(draws.len()); points];
    for (s, theta) in draws.draws().iter().enumerate() {
        for (n, col) in columns.iter_mut().enumerate() {
            let v = lik.pointwise_log_lik(n, theta);
            let allowed = v.is_finite() || (v == f64::NEG_INFINITY && zero_likelihood == ZeroLikelihood::Flag);
            if !allowed {
                return Err(MatrixError::NonFinite { draw: s, point: n, value: v });
            }
            col.push(v);
        }
    }
    Ok(LogLikMatrix::from_columns_with(lik.datapoint_ids(), columns, zero_likelihood)?)
}
