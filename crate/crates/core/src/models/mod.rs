//! Built-in models.

pub mod hierlogreg;
pub mod nb2;
pub mod presidents;
pub mod toy;

use thiserror::Error;

pub use hierlogreg::{HierLogReg, Survey, Variant};
pub use nb2::{mixture_pointwise_log_lik, moment_match_mu_prior, nb2_log_pmf, Nb2Mixture};
pub use toy::{conjugate_gamma_posterior, GammaGammaToy, GammaLikelihood};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    Parameter { name: &'static str, requirement: &'static str, value: f64 },
    #[error("datapoint {index} must be positive, got {value}")]
    NonPositiveData { index: usize, value: f64 },
    #[error("data variance is zero; cannot moment-match a gamma prior")]
    ZeroVariance,
    #[error("need at least {needed} datapoints, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("{field} has {got} entries, expected {expected}")]
    Length { field: &'static str, got: usize, expected: usize },
    #[error("{field} value {value} at row {row} is out of range")]
    OutOfRange { field: &'static str, row: usize, value: String },
    #[error("{field} level {level} has no observations")]
    EmptyLevel { field: &'static str, level: String },
    #[error("variant `{variant}` needs the `{field}` column")]
    MissingColumn { variant: &'static str, field: &'static str },
}

/// Gamma hyperparameters, shape/rate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        crate::math::gamma_log_pdf(x, self.shape, self.rate)
    }
}

/// Make labels unique by appending ` (k)` to the k-th occurrence of a
/// repeated label, counting from 2.
pub fn disambiguate<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    let mut seen: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    labels
        .iter()
        .map(|label| {
            let label = label.as_ref();
            let k = seen.entry(label).or_insert(0);
            *k += 1;
            if *k == 1 {
                label.to_string()
            } else {
                format!("{label} ({k})")
            }
        })
        .collect()
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::Parameter { name, requirement: "positive and finite", value })
    }
}
