//! First-order Taylor approximation of WAPDI and its comparison with the
//! Monte Carlo estimate.
//!
//! For scalar `theta`, `WAPDI(n) ~ p'(x_n | E[theta])^2 V[theta] / log mu(n)`
//! where `p'` is the derivative of the log-likelihood. Vector parameters use
//! the coordinate-wise sum `sum_d g_d^2 v_d`, ignoring posterior covariances.

use serde::Serialize;
use thiserror::Error;

use crate::model::PointwiseLikelihood;
use crate::pdi::{self, EstimatorConfig, Flags, LogLikMatrix, DEFAULT_WAPDI_EPSILON};
use crate::sampler::PosteriorDraws;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticError {
    #[error("posterior mean has {mean} coordinates but variance has {var}")]
    Length { mean: usize, var: usize },
    #[error("gradient coordinate {coordinate} is {value}")]
    NonFiniteGradient { coordinate: usize, value: f64 },
    #[error("log_mu = {0} is too close to zero")]
    NearSingular(f64),
    #[error("matrix is {matrix_draws}x{matrix_points} but draws/likelihood give {draws}x{points}")]
    Shape { matrix_draws: usize, matrix_points: usize, draws: usize, points: usize },
    #[error(transparent)]
    Column(#[from] pdi::ColumnError),
}

/// Central differences with `h_d = cbrt(eps) * max(1, |theta_d|)`.
pub fn finite_difference_gradient<L: PointwiseLikelihood + ?Sized>(lik: &L, n: usize, theta: &[f64]) -> Vec<f64> {
    let base = f64::EPSILON.cbrt();
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|d| {
            let h = base * theta[d].abs().max(1.0);
            probe[d] = theta[d] + h;
            let up = lik.pointwise_log_lik(n, &probe);
            probe[d] = theta[d] - h;
            let down = lik.pointwise_log_lik(n, &probe);
            probe[d] = theta[d];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn taylor_from_gradient(gradient: &[f64], posterior_var: &[f64], log_mu_n: f64) -> Result<f64, DiagnosticError> {
    if let Some((coordinate, &value)) = gradient.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(DiagnosticError::NonFiniteGradient { coordinate, value });
    }
    if !log_mu_n.is_finite() || log_mu_n == 0.0 || log_mu_n.abs() < DEFAULT_WAPDI_EPSILON {
        return Err(DiagnosticError::NearSingular(log_mu_n));
    }
    let numerator: f64 = gradient.iter().zip(posterior_var).map(|(g, v)| g * g * v).sum();
    if numerator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / log_mu_n)
}

/// `sum_d g_d^2 v_d / log_mu_n`, with `g` the gradient of the pointwise
/// log-likelihood at the posterior mean.
pub fn wapdi_taylor<L: PointwiseLikelihood + ?Sized>(
    lik: &L,
    n: usize,
    posterior_mean: &[f64],
    posterior_var: &[f64],
    log_mu_n: f64,
) -> Result<f64, DiagnosticError> {
    if posterior_mean.len() != posterior_var.len() {
        return Err(DiagnosticError::Length { mean: posterior_mean.len(), var: posterior_var.len() });
    }
    let gradient = finite_difference_gradient(lik, n, posterior_mean);
    taylor_from_gradient(&gradient, posterior_var, log_mu_n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorRow {
    pub index: usize,
    pub id: String,
    pub log_mu: f64,
    pub wapdi_exact: Option<f64>,
    pub wapdi_taylor: Option<f64>,
    /// `|wapdi_exact - wapdi_taylor|` when both are defined.
    pub abs_error: Option<f64>,
    pub gradient: Vec<f64>,
    #[serde(serialize_with = "flags_as_string")]
    pub flags: Flags,
}

fn flags_as_string<S: serde::Serializer>(flags: &Flags, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(flags)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorReport {
    /// Largest `abs_error` first; undefined errors last.
    pub rows: Vec<TaylorRow>,
    pub posterior_mean: Vec<f64>,
    pub posterior_var: Vec<f64>,
}

impl TaylorReport {
    /// Spearman correlation of exact and Taylor WAPDI over rows where both
    /// are defined.
    pub fn spearman(&self) -> Option<f64> {
        let (a, b): (Vec<f64>, Vec<f64>) =
            self.rows.iter().filter_map(|r| Some((r.wapdi_exact?, r.wapdi_taylor?))).unzip();
        spearman(&a, &b)
    }
}

/// Pair the Monte Carlo WAPDI of `matrix` with the Taylor approximation at
/// the posterior moments of `draws`.
pub fn compare_exact_vs_taylor<L: PointwiseLikelihood + ?Sized>(
    lik: &L,
    draws: &PosteriorDraws,
    matrix: &LogLikMatrix,
) -> Result<TaylorReport, DiagnosticError> {
    if matrix.draw_count() != draws.len() || matrix.point_count() != lik.point_count() {
        return Err(DiagnosticError::Shape {
            matrix_draws: matrix.draw_count(),
            matrix_points: matrix.point_count(),
            draws: draws.len(),
            points: lik.point_count(),
        });
    }
    let summaries = pdi::summarize(matrix, &EstimatorConfig::default())?;
    let mean = draws.posterior_mean().to_vec();
    let var = draws.posterior_var().to_vec();
    let mut rows: Vec<TaylorRow> = summaries
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let gradient = finite_difference_gradient(lik, n, &mean);
            let mut flags = s.flags;
            let taylor = match taylor_from_gradient(&gradient, &var, s.log_mu) {
                Ok(v) => Some(v),
                Err(DiagnosticError::NonFiniteGradient { .. }) => {
                    flags.insert(Flags::NON_FINITE_GRADIENT);
                    None
                }
                Err(_) => {
                    flags.insert(Flags::NEAR_SINGULAR);
                    None
                }
            };
            let abs_error = match (s.wapdi, taylor) {
                (Some(e), Some(t)) => Some((e - t).abs()),
                _ => None,
            };
            TaylorRow {
                index: n,
                id: matrix.ids()[n].clone(),
                log_mu: s.log_mu,
                wapdi_exact: s.wapdi,
                wapdi_taylor: taylor,
                abs_error,
                gradient,
                flags,
            }
        })
        .collect();
    rows.sort_by(|a, b| match (a.abs_error, b.abs_error) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    Ok(TaylorReport { rows, posterior_mean: mean, posterior_var: var })
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation. `None` for fewer than two pairs, mismatched
/// lengths, or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}
