//! Posterior sampling for the built-in models.
//!
//! [`adaptive_rw_metropolis`] is a random-walk Metropolis sampler over the
//! unconstrained parameter space. During warmup it tunes a scalar step size
//! by Robbins-Monro toward a target acceptance rate and, in a sequence of
//! doubling windows, estimates the proposal covariance from the chain
//! itself. Both are frozen after warmup, so the kept draws come from a
//! fixed Metropolis kernel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::math::mean_and_sample_variance;
use crate::model::{log_density_unconstrained, Model};

/// Draws per run unless configured otherwise.
pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_TARGET_ACCEPTANCE: f64 = 0.234;

/// Below this post-warmup acceptance rate the run carries a warning.
const LOW_ACCEPTANCE: f64 = 0.01;
/// Robbins-Monro gain `(t + 1)^-RM_DECAY`.
const RM_DECAY: f64 = 0.6;
/// Warmup shorter than this only tunes the step size.
const MIN_WARMUP_FOR_COVARIANCE: usize = 150;
const FIRST_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("log density is not finite at the initial point {point:?}")]
    InitialPoint { point: Vec<f64> },
    #[error("log density is {value} at iteration {iteration}, point {point:?}")]
    InvalidLogDensity { iteration: usize, value: f64, point: Vec<f64> },
    #[error("gamma posterior needs positive shape and rate, got ({shape}, {rate})")]
    GammaParameters { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub warmup: usize,
    /// Kept draws `S`.
    pub draws: usize,
    /// Keep every `thin`-th post-warmup state.
    pub thin: usize,
    /// Initial scalar step size; `2.38 / sqrt(dim)` when unset.
    pub initial_step_size: Option<f64>,
    pub target_acceptance: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            warmup: 1000,
            draws: DEFAULT_DRAWS,
            thin: 1,
            initial_step_size: None,
            target_acceptance: DEFAULT_TARGET_ACCEPTANCE,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.draws < 2 {
            return Err(SamplerError::Config(format!("need at least 2 draws, got {}", self.draws)));
        }
        if self.thin == 0 {
            return Err(SamplerError::Config("thin must be at least 1".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(SamplerError::Config(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        if let Some(h) = self.initial_step_size {
            if !(h > 0.0 && h.is_finite()) {
                return Err(SamplerError::Config(format!("step size must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// `S` posterior draws in constrained space with their moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    draws: Vec<Vec<f64>>,
    mean: Vec<f64>,
    var: Vec<f64>,
    pub acceptance_rate: f64,
    pub seed: u64,
    /// Per-coordinate standard deviation of the final unconstrained
    /// proposal; empty for exact samplers.
    pub proposal_sd: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PosteriorDraws {
    /// Wrap draws, computing per-coordinate sample mean and variance.
    pub fn from_draws(names: Vec<String>, draws: Vec<Vec<f64>>, acceptance_rate: f64, seed: u64) -> Self {
        assert!(draws.len() >= 2, "need at least 2 draws");
        let dim = names.len();
        assert!(draws.iter().all(|d| d.len() == dim), "draw length mismatch");
        let (mean, var) = (0..dim)
            .map(|d| {
                let col: Vec<f64> = draws.iter().map(|t| t[d]).collect();
                mean_and_sample_variance(&col)
            })
            .unzip();
        Self { names, draws, mean, var, acceptance_rate, seed, proposal_sd: Vec::new(), warnings: Vec::new() }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn posterior_mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn posterior_var(&self) -> &[f64] {
        &self.var
    }

    /// Draws of the coordinate called `name`.
    pub fn coordinate(&self, name: &str) -> Option<Vec<f64>> {
        let d = self.names.iter().position(|n| n == name)?;
        Some(self.draws.iter().map(|t| t[d]).collect())
    }

    /// Concatenate chains of the same model. The seed of the first chain is
    /// kept; acceptance is averaged by draw count.
    pub fn merge(chains: Vec<PosteriorDraws>) -> PosteriorDraws {
        assert!(!chains.is_empty(), "no chains to merge");
        let names = chains[0].names.clone();
        let seed = chains[0].seed;
        let total: usize = chains.iter().map(|c| c.len()).sum();
        let acceptance = chains.iter().map(|c| c.acceptance_rate * c.len() as f64).sum::<f64>() / total as f64;
        let proposal_sd = chains[0].proposal_sd.clone();
        let warnings = chains.iter().flat_map(|c| c.warnings.clone()).collect();
        let draws = chains.into_iter().flat_map(|c| c.draws).collect();
        let mut merged = PosteriorDraws::from_draws(names, draws, acceptance, seed);
        merged.proposal_sd = proposal_sd;
        merged.warnings = warnings;
        merged
    }
}

/// Exact draws of a scalar rate from `Gam(shape, rate)`.
pub fn sample_gamma_posterior(shape: f64, rate: f64, draws: usize, seed: u64) -> Result<PosteriorDraws, SamplerError> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(SamplerError::GammaParameters { shape, rate });
    }
    if draws < 2 {
        return Err(SamplerError::Config(format!("need at least 2 draws, got {draws}")));
    }
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|_| SamplerError::GammaParameters { shape, rate })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..draws).map(|_| vec![dist.sample(&mut rng)]).collect();
    Ok(PosteriorDraws::from_draws(vec!["beta".into()], draws, 1.0, seed))
}

/// Warmup iterations at which the proposal covariance is re-estimated,
/// as `(start, end)` windows: a 15% initial buffer, doubling windows, and a
/// 10% terminal buffer for the step size alone.
fn covariance_windows(warmup: usize) -> Vec<(usize, usize)> {
    if warmup < MIN_WARMUP_FOR_COVARIANCE {
        return Vec::new();
    }
    let start = warmup * 15 / 100;
    let end = warmup - warmup / 10;
    let mut windows = Vec::new();
    let mut at = start;
    let mut size = FIRST_WINDOW;
    while at < end {
        let next = if at + 3 * size > end { end } else { at + size };
        windows.push((at, next));
        at = next;
        size *= 2;
    }
    windows
}

/// Cholesky factor of the window's sample covariance, shrunk toward a
/// small multiple of the identity at the covariance's own scale. `None` if
/// the chain did not move.
fn proposal_factor(samples: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = samples.len();
    let dim = samples.first()?.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().fold(DVector::zeros(dim), |acc, s| acc + DVector::from_column_slice(s)) / n as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    for s in samples {
        let d = DVector::from_column_slice(s) - &mean;
        cov += &d * d.transpose();
    }
    cov /= (n - 1) as f64;
    let scale = cov.trace() / dim as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let w = n as f64 / (n as f64 + 5.0);
    let cov = cov * w + DMatrix::identity(dim, dim) * (1e-3 * scale * (1.0 - w));
    cov.cholesky().map(|c| c.l())
}

/// Random-walk Metropolis with warmup-only adaptation.
///
/// Identical `(model, config)` give bitwise-identical draws. The kept draws
/// are passed through [`Model::relabel`] before moments are computed.
pub fn adaptive_rw_metropolis<M: Model + ?Sized>(
    model: &M,
    config: &SamplerConfig,
) -> Result<PosteriorDraws, SamplerError> {
    config.validate()?;
    let layout = model.layout();
    let dim = layout.unconstrained_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut z = layout.unconstrain(&model.prior_mean());
    let mut lp = log_density_unconstrained(model, &z);
    if !lp.is_finite() {
        return Err(SamplerError::InitialPoint { point: layout.constrain(&z).0 });
    }

    let default_step = 2.38 / (dim as f64).sqrt();
    let mut log_step = config.initial_step_size.unwrap_or(default_step).ln();
    let mut factor: DMatrix<f64> = DMatrix::identity(dim, dim);
    let windows = covariance_windows(config.warmup);
    let mut window = 0;
    let mut window_samples: Vec<Vec<f64>> = Vec::new();
    let mut rm_t = 0usize;

    let total = config.warmup + config.draws * config.thin;
    let mut kept = Vec::with_capacity(config.draws);
    let mut accepted = 0usize;
    let mut eps = DVector::zeros(dim);

    for it in 0..total {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        let step = log_step.exp();
        let delta = &factor * &eps * step;
        let proposal: Vec<f64> = z.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
        let lp_new = log_density_unconstrained(model, &proposal);
        if lp_new.is_nan() || lp_new == f64::INFINITY {
            return Err(SamplerError::InvalidLogDensity {
                iteration: it,
                value: lp_new,
                point: layout.constrain(&proposal).0,
            });
        }
        let log_ratio = lp_new - lp;
        let u: f64 = rng.random();
        let accept = u.ln() < log_ratio;
        if accept {
            z = proposal;
            lp = lp_new;
        }

        if it < config.warmup {
            let alpha = log_ratio.min(0.0).exp();
            rm_t += 1;
            log_step += (alpha - config.target_acceptance) * (rm_t as f64).powf(-RM_DECAY);
            log_step = log_step.clamp(-40.0, 10.0);

            if let Some(&(start, end)) = windows.get(window) {
                if it >= start {
                    window_samples.push(z.clone());
                }
                if it + 1 == end {
                    if let Some(l) = proposal_factor(&window_samples) {
                        // Keep the overall proposal scale continuous across
                        // the change of shape.
                        log_step += (factor.norm() / l.norm()).ln();
                        factor = l;
                        rm_t = 0;
                    }
                    window_samples.clear();
                    window += 1;
                }
            }
        } else {
            if accept {
                accepted += 1;
            }
            if (it - config.warmup + 1).is_multiple_of(config.thin) {
                kept.push(layout.constrain(&z).0);
            }
        }
    }

    model.relabel(&mut kept);
    let acceptance = accepted as f64 / (config.draws * config.thin) as f64;
    let mut out = PosteriorDraws::from_draws(layout.coordinate_names(), kept, acceptance, config.seed);
    let step = log_step.exp();
    out.proposal_sd = factor.row_iter().map(|r| step * r.norm()).collect();
    if acceptance < LOW_ACCEPTANCE {
        out.warnings.push(format!(
            "post-warmup acceptance rate {acceptance:.4} is below {LOW_ACCEPTANCE}; draws are likely unreliable"
        ));
    }
    Ok(out)
}

/// Run `chains` independent chains with seeds `seed, seed + 1, ...` in
/// parallel and concatenate them in seed order.
pub fn run_chains<M: Model + ?Sized>(
    model: &M,
    config: &SamplerConfig,
    chains: usize,
) -> Result<PosteriorDraws, SamplerError> {
    if chains == 0 {
        return Err(SamplerError::Config("need at least one chain".into()));
    }
    let results: Vec<Result<PosteriorDraws, SamplerError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let cfg = SamplerConfig { seed: config.seed.wrapping_add(c as u64), ..config.clone() };
                scope.spawn(move || adaptive_rw_metropolis(model, &cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread panicked")).collect()
    });
    let chains = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let merged = PosteriorDraws::merge(chains);
    // Chains may have settled on different labellings.
    let mut draws = merged.draws().to_vec();
    model.relabel(&mut draws);
    let mut out = PosteriorDraws::from_draws(merged.names().to_vec(), draws, merged.acceptance_rate, config.seed);
    out.proposal_sd = merged.proposal_sd;
    out.warnings = merged.warnings;
    Ok(out)
}
