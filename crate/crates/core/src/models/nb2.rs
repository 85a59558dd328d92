//! Mixture of negative binomials in the mean/dispersion ("NB2")
//! parameterization: mean `mu`, variance `mu + mu^2 / phi`.

use statrs::function::gamma::ln_gamma;

use super::presidents::{president_days, president_ids};
use super::{require_positive, GammaPrior, ModelError};
use crate::math::{log_sum_exp, mean_and_sample_variance};
use crate::model::{Model, PointwiseLikelihood};
use crate::transform::{ParamBlock, ParamLayout, Transform};

/// `log NB2(x; mu, phi)`.
pub fn nb2_log_pmf(x: u64, mu: f64, phi: f64) -> Result<f64, ModelError> {
    require_positive("mu", mu)?;
    require_positive("phi", phi)?;
    let x = x as f64;
    // phi * log(phi / (phi + mu)) + x * log(mu / (phi + mu))
    let log_total = (phi + mu).ln();
    Ok(ln_gamma(x + phi) - ln_gamma(phi) - ln_gamma(x + 1.0) - phi * (mu / phi).ln_1p() + x * (mu.ln() - log_total))
}

/// `log sum_k pi_k NB2(x; mu_k, phi_k)`.
pub fn mixture_pointwise_log_lik(x: u64, pi: &[f64], mu: &[f64], phi: &[f64]) -> Result<f64, ModelError> {
    debug_assert!(pi.len() == mu.len() && mu.len() == phi.len());
    let mut terms = Vec::with_capacity(pi.len());
    for k in 0..pi.len() {
        if !(pi[k] >= 0.0) {
            return Err(ModelError::Parameter { name: "pi", requirement: "non-negative", value: pi[k] });
        }
        terms.push(pi[k].ln() + nb2_log_pmf(x, mu[k], phi[k])?);
    }
    Ok(log_sum_exp(&terms))
}

/// Gamma prior whose mean and variance equal the sample mean and sample
/// variance of `data`: shape `m^2 / v`, rate `m / v`.
pub fn moment_match_mu_prior(data: &[u64]) -> Result<GammaPrior, ModelError> {
    if data.len() < 2 {
        return Err(ModelError::TooFewPoints { needed: 2, got: data.len() });
    }
    let xs: Vec<f64> = data.iter().map(|&x| x as f64).collect();
    let (m, v) = mean_and_sample_variance(&xs);
    if v <= 0.0 {
        return Err(ModelError::ZeroVariance);
    }
    Ok(moment_matched(m, v))
}

fn moment_matched(mean: f64, variance: f64) -> GammaPrior {
    GammaPrior { shape: mean * mean / variance, rate: mean / variance }
}

/// `pi ~ Dirichlet(alpha)`, `mu_k ~ Gam(moment-matched)`,
/// `phi_k ~ Gam(shape 1, rate 0.01)`, `x_n ~ sum_k pi_k NB2(mu_k, phi_k)`.
/// Relabelling searches all `K!` permutations, so `K` stays small.
pub const MAX_COMPONENTS: usize = 6;

#[derive(Debug, Clone)]
pub struct Nb2Mixture {
    ids: Vec<String>,
    counts: Vec<u64>,
    components: usize,
    dirichlet_alpha: f64,
    mu_prior: GammaPrior,
    phi_prior: GammaPrior,
    layout: ParamLayout,
}

impl Nb2Mixture {
    pub const DEFAULT_PHI_PRIOR: GammaPrior = GammaPrior { shape: 1.0, rate: 0.01 };

    pub fn new(ids: Vec<String>, counts: Vec<u64>, components: usize) -> Result<Self, ModelError> {
        if ids.len() != counts.len() {
            return Err(ModelError::Length { field: "ids", got: ids.len(), expected: counts.len() });
        }
        if !(2..=MAX_COMPONENTS).contains(&components) {
            return Err(ModelError::Parameter {
                name: "components",
                requirement: "between 2 and 6",
                value: components as f64,
            });
        }
        let mu_prior = moment_match_mu_prior(&counts)?;
        let layout = ParamLayout::new(vec![
            ParamBlock::new("pi", Transform::Simplex, components),
            ParamBlock::new("mu", Transform::Positive, components),
            ParamBlock::new("phi", Transform::Positive, components),
        ]);
        Ok(Self { ids, counts, components, dirichlet_alpha: 1.0, mu_prior, phi_prior: Self::DEFAULT_PHI_PRIOR, layout })
    }

    /// Three components on the embedded presidents table.
    pub fn presidents() -> Self {
        Self::new(president_ids(), president_days(), 3).expect("embedded data is valid")
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn mu_prior(&self) -> GammaPrior {
        self.mu_prior
    }

    pub fn phi_prior(&self) -> GammaPrior {
        self.phi_prior
    }

    /// `(pi, mu, phi)` views of a constrained point.
    pub fn unpack<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let k = self.components;
        (&theta[..k], &theta[k..2 * k], &theta[2 * k..3 * k])
    }
}

impl PointwiseLikelihood for Nb2Mixture {
    fn point_count(&self) -> usize {
        self.counts.len()
    }

    fn pointwise_log_lik(&self, n: usize, theta: &[f64]) -> f64 {
        let (pi, mu, phi) = self.unpack(theta);
        mixture_pointwise_log_lik(self.counts[n], pi, mu, phi).unwrap_or(f64::NAN)
    }

    fn datapoint_ids(&self) -> Vec<String> {
        self.ids.clone()
    }
}

impl Model for Nb2Mixture {
    fn name(&self) -> &str {
        "nb2-mixture"
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let (pi, mu, phi) = self.unpack(theta);
        let k = self.components as f64;
        let a = self.dirichlet_alpha;
        let dirichlet = ln_gamma(k * a) - k * ln_gamma(a) + (a - 1.0) * pi.iter().map(|p| p.ln()).sum::<f64>();
        let mu_lp: f64 = mu.iter().map(|&m| self.mu_prior.log_pdf(m)).sum();
        let phi_lp: f64 = phi.iter().map(|&p| self.phi_prior.log_pdf(p)).sum();
        dirichlet + mu_lp + phi_lp
    }

    fn prior_mean(&self) -> Vec<f64> {
        let k = self.components;
        let mut theta = vec![1.0 / k as f64; k];
        theta.extend(std::iter::repeat_n(self.mu_prior.mean(), k));
        theta.extend(std::iter::repeat_n(self.phi_prior.mean(), k));
        theta
    }

    /// Sort components by ascending `mu`.
    fn canonicalize(&self, theta: &mut [f64]) {
        let k = self.components;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| theta[k + a].total_cmp(&theta[k + b]));
        self.permute(theta, &order);
    }

    /// Pivot relabelling: each draw takes the component permutation closest,
    /// in `(log mu, log phi)`, to the highest-density draw. Ordering by `mu`
    /// alone is not enough when a dispersed component's `mu` overlaps a
    /// peaked one.
    fn relabel(&self, draws: &mut [Vec<f64>]) {
        for theta in draws.iter_mut() {
            self.canonicalize(theta);
        }
        let Some(pivot) = draws
            .iter()
            .map(|t| self.log_joint(t))
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, lp)| match best {
                Some((_, b)) if !(lp > b) => best,
                _ => Some((i, lp)),
            })
            .map(|(i, _)| draws[i].clone())
        else {
            return;
        };
        let k = self.components;
        let perms = permutations(k);
        for theta in draws.iter_mut() {
            let cost = |p: &[usize]| -> f64 {
                (0..k)
                    .map(|slot| {
                        let from = p[slot];
                        let dm = theta[k + from].ln() - pivot[k + slot].ln();
                        let dp = theta[2 * k + from].ln() - pivot[2 * k + slot].ln();
                        dm * dm + dp * dp
                    })
                    .sum()
            };
            let best = perms
                .iter()
                .map(|p| (p, cost(p)))
                .fold(None, |best: Option<(&Vec<usize>, f64)>, (p, c)| match best {
                    Some((_, b)) if !(c < b) => best,
                    _ => Some((p, c)),
                })
                .map(|(p, _)| p.clone())
                .expect("at least one permutation");
            self.permute(theta, &best);
        }
    }
}

impl Nb2Mixture {
    /// Slot `i` of each block takes component `order[i]`.
    fn permute(&self, theta: &mut [f64], order: &[usize]) {
        let k = self.components;
        let old = theta.to_vec();
        for (slot, &from) in order.iter().enumerate() {
            for block in 0..3 {
                theta[block * k + slot] = old[block * k + from];
            }
        }
    }
}

/// All permutations of `0..k` in lexicographic order, identity first.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in 0..k {
            if !prefix.contains(&i) {
                prefix.push(i);
                extend(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(k), k, &mut out);
    out
}
