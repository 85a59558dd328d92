//! Posterior dispersion estimators.
//!
//! Everything here works on a [`LogLikMatrix`]: `S` posterior draws (rows) by
//! `N` datapoints (columns) of `log p(x_n | theta_s)`. For each column we
//! estimate
//!
//! - `log_mu`: log of the posterior predictive `E[p(x_n | theta)]`,
//! - `mu_log`: `E[log p(x_n | theta)]`,
//! - `log_sigma2`: log of `V[p(x_n | theta)]`,
//! - `sigma2_log`: `V[log p(x_n | theta)]`,
//!
//! and combine them into WAPDI (`sigma2_log / log_mu`), the log-domain PDI
//! ratio (`log_sigma2 - log_mu`) and the pointwise WAIC term
//! (`-log_mu + sigma2_log`).
//!
//! Likelihood-scale quantities never leave log space. Variances use the
//! `S - 1` divisor. Each estimator sorts a copy of its column first, so the
//! floating-point result depends only on the multiset of draws and is
//! bitwise invariant under any reordering of the rows.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Default threshold below which `|log_mu|` is treated as a singular WAPDI
/// denominator.
pub const DEFAULT_WAPDI_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdiError {
    #[error("log-likelihood column is empty")]
    EmptyColumn,
    #[error("log-likelihood is NaN at draw {draw}")]
    NotANumber { draw: usize },
    #[error("log-likelihood is +inf at draw {draw}")]
    PositiveInfinity { draw: usize },
    #[error(
        "log-likelihood is -inf (zero likelihood) at draw {draw}; \
         enable zero-likelihood flag mode to keep such columns"
    )]
    ZeroLikelihood { draw: usize },
    #[error("variance needs at least 2 draws, got {0}")]
    TooFewDraws(usize),
    #[error("matrix needs at least one datapoint")]
    NoDatapoints,
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("column {column} has {got} draws, expected {expected}")]
    RaggedColumn { column: usize, got: usize, expected: usize },
    #[error("expected {expected} datapoint ids, got {got}")]
    IdCount { expected: usize, got: usize },
    #[error("duplicate datapoint id `{0}`")]
    DuplicateId(String),
    #[error("datapoint `{0}` has no group label")]
    MissingGroup(String),
}

/// Column `n` of the matrix, with its position, attached to an error.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("datapoint {index} (`{id}`): {source}")]
pub struct ColumnError {
    pub index: usize,
    pub id: String,
    #[source]
    pub source: PdiError,
}

/// How `-inf` log-likelihood entries (draws under which a datapoint has zero
/// likelihood) are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroLikelihood {
    /// Refuse to build the matrix.
    #[default]
    Reject,
    /// Keep the column; quantities that become undefined are reported as
    /// missing and the row is flagged.
    Flag,
}

/// S draws x N datapoints of pointwise log-likelihoods. Stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    ids: Vec<String>,
    draws: usize,
    columns: Vec<Vec<f64>>,
    zero_likelihood: ZeroLikelihood,
}

impl LogLikMatrix {
    /// Build from draw-major rows, rejecting `-inf` entries.
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, PdiError> {
        Self::from_rows_with(ids, rows, ZeroLikelihood::Reject)
    }

    pub fn from_rows_with(
        ids: Vec<String>,
        rows: &[Vec<f64>],
        zero_likelihood: ZeroLikelihood,
    ) -> Result<Self, PdiError> {
        let points = ids.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); points];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != points {
                return Err(PdiError::RaggedRow { row: r, got: row.len(), expected: points });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::from_columns_with(ids, columns, zero_likelihood)
    }

    pub fn from_columns(ids: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, PdiError> {
        Self::from_columns_with(ids, columns, ZeroLikelihood::Reject)
    }

    pub fn from_columns_with(
        ids: Vec<String>,
        columns: Vec<Vec<f64>>,
        zero_likelihood: ZeroLikelihood,
    ) -> Result<Self, PdiError> {
        if ids.len() != columns.len() {
            return Err(PdiError::IdCount { expected: columns.len(), got: ids.len() });
        }
        if columns.is_empty() {
            return Err(PdiError::NoDatapoints);
        }
        let draws = columns[0].len();
        if draws < 2 {
            return Err(PdiError::TooFewDraws(draws));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(PdiError::DuplicateId(id.clone()));
            }
        }
        for (n, col) in columns.iter().enumerate() {
            if col.len() != draws {
                return Err(PdiError::RaggedColumn { column: n, got: col.len(), expected: draws });
            }
            for (s, &v) in col.iter().enumerate() {
                check_entry(s, v, zero_likelihood)?;
            }
        }
        Ok(Self { ids, draws, columns, zero_likelihood })
    }

    pub fn draw_count(&self) -> usize {
        self.draws
    }

    pub fn point_count(&self) -> usize {
        self.columns.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn column(&self, n: usize) -> &[f64] {
        &self.columns[n]
    }

    pub fn value(&self, draw: usize, point: usize) -> f64 {
        self.columns[point][draw]
    }

    pub fn zero_likelihood(&self) -> ZeroLikelihood {
        self.zero_likelihood
    }

    /// Draw `s` as a row vector.
    pub fn row(&self, s: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[s]).collect()
    }

    /// Same matrix with its draws reordered by `order` (a permutation of
    /// `0..S`).
    pub fn permute_draws(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.draws, "permutation length");
        let columns = self.columns.iter().map(|c| order.iter().map(|&s| c[s]).collect()).collect();
        Self { columns, ..self.clone() }
    }
}

fn check_entry(draw: usize, v: f64, policy: ZeroLikelihood) -> Result<(), PdiError> {
    if v.is_nan() {
        Err(PdiError::NotANumber { draw })
    } else if v == f64::INFINITY {
        Err(PdiError::PositiveInfinity { draw })
    } else if v == f64::NEG_INFINITY && policy == ZeroLikelihood::Reject {
        Err(PdiError::ZeroLikelihood { draw })
    } else {
        Ok(())
    }
}

/// Validated copy of a column, sorted ascending.
fn sorted_column(column: &[f64], policy: ZeroLikelihood) -> Result<Vec<f64>, PdiError> {
    if column.is_empty() {
        return Err(PdiError::EmptyColumn);
    }
    for (s, &v) in column.iter().enumerate() {
        check_entry(s, v, policy)?;
    }
    let mut sorted = column.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted)
}

fn require_two(len: usize) -> Result<(), PdiError> {
    if len < 2 {
        Err(PdiError::TooFewDraws(len))
    } else {
        Ok(())
    }
}

// The `sorted_*` kernels assume a non-empty ascending column.

fn sorted_log_mean_exp(sorted: &[f64]) -> f64 {
    let max = sorted[sorted.len() - 1];
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = sorted.iter().map(|&x| (x - max).exp()).sum();
    max + (sum.ln() - (sorted.len() as f64).ln())
}

fn sorted_mean(sorted: &[f64]) -> f64 {
    let shift = sorted[sorted.len() - 1];
    if !shift.is_finite() || sorted[0] == f64::NEG_INFINITY {
        return if sorted[0] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { shift };
    }
    shift + sorted.iter().map(|&x| x - shift).sum::<f64>() / sorted.len() as f64
}

fn sorted_variance(sorted: &[f64]) -> f64 {
    let mean = sorted_mean(sorted);
    let ss: f64 = sorted.iter().map(|&x| (x - mean) * (x - mean)).sum();
    ss / (sorted.len() - 1) as f64
}

/// `log V[exp(column)]`, or `None` when the variance is zero.
///
/// Each draw is written as `exp(ll_s) = mu * (1 + expm1(ll_s - log_mu))`, so
/// `sigma^2 = mu^2 * sum(expm1(ll_s - log_mu)^2) / (S - 1)`. The deviations
/// are bounded above by `S - 1`, and `expm1` keeps nearly-equal draws from
/// cancelling.
fn sorted_log_variance_exp(sorted: &[f64], log_mu: f64) -> Option<f64> {
    if log_mu == f64::NEG_INFINITY {
        return None;
    }
    let ss: f64 = sorted
        .iter()
        .map(|&x| {
            let d = (x - log_mu).exp_m1();
            d * d
        })
        .sum();
    if ss > 0.0 {
        Some(2.0 * log_mu + (ss / (sorted.len() - 1) as f64).ln())
    } else {
        None
    }
}

fn ratio_or_flag(numerator: f64, log_mu: f64, epsilon: f64) -> Option<f64> {
    if log_mu == 0.0 || log_mu.abs() < epsilon || !log_mu.is_finite() {
        None
    } else {
        Some(numerator / log_mu)
    }
}

/// `log((1/S) sum_s exp(ll_s))`, the log posterior predictive density.
pub fn log_posterior_predictive(column: &[f64]) -> Result<f64, PdiError> {
    sorted_column(column, ZeroLikelihood::Reject).map(|s| sorted_log_mean_exp(&s))
}

/// Posterior mean of the log-likelihood.
pub fn mean_log_lik(column: &[f64]) -> Result<f64, PdiError> {
    sorted_column(column, ZeroLikelihood::Reject).map(|s| sorted_mean(&s))
}

/// Sample variance of the log-likelihood.
pub fn var_log_lik(column: &[f64]) -> Result<f64, PdiError> {
    require_two(column.len())?;
    sorted_column(column, ZeroLikelihood::Reject).map(|s| sorted_variance(&s))
}

/// Log of the sample variance of the likelihood. `None` means the variance
/// is zero (all draws equal, or the deviations underflowed).
pub fn log_var_lik(column: &[f64]) -> Result<Option<f64>, PdiError> {
    require_two(column.len())?;
    let sorted = sorted_column(column, ZeroLikelihood::Reject)?;
    let log_mu = sorted_log_mean_exp(&sorted);
    Ok(sorted_log_variance_exp(&sorted, log_mu))
}

/// WAPDI with the default singularity threshold.
pub fn wapdi(column: &[f64]) -> Result<Option<f64>, PdiError> {
    wapdi_with_epsilon(column, DEFAULT_WAPDI_EPSILON)
}

/// `var_log_lik / log_posterior_predictive`. `None` when
/// `|log_posterior_predictive| < epsilon`.
pub fn wapdi_with_epsilon(column: &[f64], epsilon: f64) -> Result<Option<f64>, PdiError> {
    require_two(column.len())?;
    let sorted = sorted_column(column, ZeroLikelihood::Reject)?;
    let log_mu = sorted_log_mean_exp(&sorted);
    Ok(ratio_or_flag(sorted_variance(&sorted), log_mu, epsilon))
}

/// Log of the variance-to-mean ratio of the likelihood,
/// `log_sigma2 - log_mu`. `None` when the variance is zero.
pub fn pdi_ratio(column: &[f64]) -> Result<Option<f64>, PdiError> {
    require_two(column.len())?;
    let sorted = sorted_column(column, ZeroLikelihood::Reject)?;
    let log_mu = sorted_log_mean_exp(&sorted);
    Ok(sorted_log_variance_exp(&sorted, log_mu).map(|lv| lv - log_mu))
}

/// Linear-domain value of a log-domain ratio, if it is representable.
pub fn linear_value(log_value: f64) -> Option<f64> {
    let v = log_value.exp();
    (v.is_finite() && v > 0.0).then_some(v)
}

/// Per-row reasons a quantity is missing from a [`PointwiseSummary`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Flags(u8);

impl Flags {
    pub const NONE: Flags = Flags(0);
    /// All draws of the likelihood are equal; `log_sigma2` and the PDI ratio
    /// are undefined.
    pub const ZERO_VARIANCE: Flags = Flags(1);
    /// `|log_mu|` below the WAPDI threshold.
    pub const NEAR_SINGULAR: Flags = Flags(1 << 1);
    /// The column holds `-inf` draws (flag mode only).
    pub const ZERO_LIKELIHOOD: Flags = Flags(1 << 2);
    /// A finite-difference gradient of the likelihood was not finite.
    pub const NON_FINITE_GRADIENT: Flags = Flags(1 << 3);

    const NAMES: [(Flags, &'static str); 4] = [
        (Flags::ZERO_VARIANCE, "zero_variance"),
        (Flags::NEAR_SINGULAR, "near_singular"),
        (Flags::ZERO_LIKELIHOOD, "zero_likelihood"),
        (Flags::NON_FINITE_GRADIENT, "non_finite_gradient"),
    ];

    pub fn contains(self, other: Flags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Flags) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Inverse of `Display`: `|`-separated names, empty for no flags.
    pub fn parse(s: &str) -> Option<Flags> {
        let mut flags = Flags::NONE;
        for name in s.split('|').filter(|p| !p.is_empty()) {
            let (f, _) = Self::NAMES.iter().find(|(_, n)| *n == name)?;
            flags.insert(*f);
        }
        Some(flags)
    }
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (flag, name) in Self::NAMES {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Dispersion estimates for one datapoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseSummary {
    pub log_mu: f64,
    pub mu_log: f64,
    pub log_sigma2: Option<f64>,
    pub sigma2_log: Option<f64>,
    pub wapdi: Option<f64>,
    pub pdi_ratio_log: Option<f64>,
    pub waic_term: Option<f64>,
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub wapdi_epsilon: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { wapdi_epsilon: DEFAULT_WAPDI_EPSILON }
    }
}

fn summarize_column(
    column: &[f64],
    policy: ZeroLikelihood,
    config: &EstimatorConfig,
) -> Result<PointwiseSummary, PdiError> {
    require_two(column.len())?;
    let sorted = sorted_column(column, policy)?;
    let mut flags = Flags::NONE;
    let log_mu = sorted_log_mean_exp(&sorted);
    let mu_log = sorted_mean(&sorted);
    let log_sigma2 = sorted_log_variance_exp(&sorted, log_mu);
    if log_sigma2.is_none() {
        flags.insert(Flags::ZERO_VARIANCE);
    }
    let sigma2_log = if sorted[0] == f64::NEG_INFINITY {
        flags.insert(Flags::ZERO_LIKELIHOOD);
        None
    } else {
        Some(sorted_variance(&sorted))
    };
    let wapdi = sigma2_log.and_then(|v| ratio_or_flag(v, log_mu, config.wapdi_epsilon));
    if sigma2_log.is_some() && wapdi.is_none() {
        flags.insert(Flags::NEAR_SINGULAR);
    }
    Ok(PointwiseSummary {
        log_mu,
        mu_log,
        log_sigma2,
        sigma2_log,
        wapdi,
        pdi_ratio_log: log_sigma2.map(|lv| lv - log_mu),
        waic_term: sigma2_log.map(|v| -log_mu + v),
        flags,
    })
}

/// Apply every column estimator to every column. Per-column degeneracies
/// are recorded as flags; only malformed input aborts.
pub fn summarize(matrix: &LogLikMatrix, config: &EstimatorConfig) -> Result<Vec<PointwiseSummary>, ColumnError> {
    (0..matrix.point_count())
        .map(|n| {
            summarize_column(matrix.column(n), matrix.zero_likelihood(), config).map_err(|source| ColumnError {
                index: n,
                id: matrix.ids()[n].clone(),
                source,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waic {
    /// Mean of the pointwise terms; `None` if any term is undefined.
    pub value: Option<f64>,
    pub terms: Vec<Option<f64>>,
}

fn mean_of_terms(terms: impl ExactSizeIterator<Item = Option<f64>>) -> Option<f64> {
    let n = terms.len() as f64;
    let mut sum = 0.0;
    for t in terms {
        sum += t?;
    }
    Some(sum / n)
}

/// WAIC as the average of `-log_mu + sigma2_log` over datapoints.
pub fn waic(matrix: &LogLikMatrix) -> Result<Waic, ColumnError> {
    let terms: Vec<Option<f64>> =
        summarize(matrix, &EstimatorConfig::default())?.into_iter().map(|s| s.waic_term).collect();
    Ok(Waic { value: mean_of_terms(terms.iter().copied()), terms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub summary: PointwiseSummary,
    /// 1 = most negative WAPDI.
    pub rank_wapdi: usize,
    /// 1 = lowest log predictive density.
    pub rank_log_mu: usize,
    pub group: Option<String>,
}

/// Datapoints ranked worst-first by WAPDI.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchReport {
    pub rows: Vec<ReportRow>,
    pub waic: Option<f64>,
}

impl MismatchReport {
    /// The `k` worst rows by WAPDI. WAIC still refers to the full dataset.
    pub fn top_k(&self, k: usize) -> MismatchReport {
        MismatchReport { rows: self.rows.iter().take(k).cloned().collect(), waic: self.waic }
    }
}

/// Ascending WAPDI, undefined WAPDI last, then ascending `log_mu`, then id.
fn wapdi_order(a: (&str, &PointwiseSummary), b: (&str, &PointwiseSummary)) -> std::cmp::Ordering {
    let key = |w: Option<f64>| (w.is_none(), w.unwrap_or(0.0));
    let (an, aw) = key(a.1.wapdi);
    let (bn, bw) = key(b.1.wapdi);
    an.cmp(&bn).then(aw.total_cmp(&bw)).then(a.1.log_mu.total_cmp(&b.1.log_mu)).then(a.0.cmp(b.0))
}

/// Rank datapoints. Ties in WAPDI break on `log_mu`, then on id; ties in
/// `log_mu` break on id.
pub fn rank_report(
    summaries: &[PointwiseSummary],
    ids: &[String],
    group_labels: Option<&BTreeMap<String, String>>,
) -> Result<MismatchReport, PdiError> {
    if summaries.len() != ids.len() {
        return Err(PdiError::IdCount { expected: summaries.len(), got: ids.len() });
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(PdiError::DuplicateId(id.clone()));
        }
    }

    let mut by_log_mu: Vec<usize> = (0..ids.len()).collect();
    by_log_mu.sort_by(|&a, &b| summaries[a].log_mu.total_cmp(&summaries[b].log_mu).then(ids[a].cmp(&ids[b])));
    let mut rank_log_mu = vec![0; ids.len()];
    for (r, &i) in by_log_mu.iter().enumerate() {
        rank_log_mu[i] = r + 1;
    }

    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| wapdi_order((&ids[a], &summaries[a]), (&ids[b], &summaries[b])));

    let rows = order
        .iter()
        .enumerate()
        .map(|(r, &i)| ReportRow {
            id: ids[i].clone(),
            summary: summaries[i].clone(),
            rank_wapdi: r + 1,
            rank_log_mu: rank_log_mu[i],
            group: group_labels.and_then(|g| g.get(&ids[i]).cloned()),
        })
        .collect();
    let waic = mean_of_terms(summaries.iter().map(|s| s.waic_term));
    Ok(MismatchReport { rows, waic })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    /// Mean over rows with a defined WAPDI; `None` if there are none.
    pub mean_wapdi: Option<f64>,
    pub mean_log_mu: f64,
    pub count: usize,
}

/// Per-label means of WAPDI and `log_mu`, ordered by label.
pub fn group_aggregate(
    report: &MismatchReport,
    grouping: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, GroupStats>, PdiError> {
    #[derive(Default)]
    struct Acc {
        wapdi_sum: f64,
        wapdi_count: usize,
        log_mu_sum: f64,
        count: usize,
    }
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for row in &report.rows {
        let label = grouping.get(&row.id).ok_or_else(|| PdiError::MissingGroup(row.id.clone()))?;
        let a = acc.entry(label).or_default();
        if let Some(w) = row.summary.wapdi {
            a.wapdi_sum += w;
            a.wapdi_count += 1;
        }
        a.log_mu_sum += row.summary.log_mu;
        a.count += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(label, a)| {
            let stats = GroupStats {
                mean_wapdi: (a.wapdi_count > 0).then(|| a.wapdi_sum / a.wapdi_count as f64),
                mean_log_mu: a.log_mu_sum / a.count as f64,
                count: a.count,
            };
            (label.to_string(), stats)
        })
        .collect())
}

/// Group labels carried on the report rows themselves.
pub fn report_grouping(report: &MismatchReport) -> BTreeMap<String, String> {
    report.rows.iter().filter_map(|r| r.group.clone().map(|g| (r.id.clone(), g))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    fn two_point() -> Vec<f64> {
        vec![0.2f64.ln(), 0.4f64.ln()]
    }

    #[test]
    fn log_posterior_predictive_fixtures() {
        assert_relative_eq!(log_posterior_predictive(&two_point()).unwrap(), 0.3f64.ln(), epsilon = 1e-12);
        assert_eq!(log_posterior_predictive(&[-3.25]).unwrap(), -3.25);
        assert_eq!(log_posterior_predictive(&[-1000.0, -1000.0]).unwrap(), -1000.0);
        assert_eq!(log_posterior_predictive(&[]), Err(PdiError::EmptyColumn));
        assert_eq!(log_posterior_predictive(&[0.0, f64::NAN]), Err(PdiError::NotANumber { draw: 1 }));
    }

    #[test]
    fn mean_and_variance_fixtures() {
        assert_relative_eq!(mean_log_lik(&two_point()).unwrap(), 0.08f64.ln() / 2.0, epsilon = 1e-12);
        assert_eq!(mean_log_lik(&[-0.7; 3]).unwrap(), -0.7);
        let ln2 = 2f64.ln();
        assert_relative_eq!(var_log_lik(&two_point()).unwrap(), ln2 * ln2 / 2.0, epsilon = 1e-12);
        assert_eq!(var_log_lik(&[-0.1; 4]).unwrap(), 0.0);
        assert_eq!(var_log_lik(&[-0.1]), Err(PdiError::TooFewDraws(1)));
    }

    #[test]
    fn variance_is_translation_invariant() {
        let col = vec![-1.3, -0.2, -4.0, -2.5];
        let shifted: Vec<f64> = col.iter().map(|x| x - 7.0).collect();
        assert_relative_eq!(var_log_lik(&col).unwrap(), var_log_lik(&shifted).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn log_var_lik_fixtures() {
        assert_relative_eq!(log_var_lik(&two_point()).unwrap().unwrap(), 0.02f64.ln(), epsilon = 1e-12);
        assert_eq!(log_var_lik(&[-2.0, -2.0]).unwrap(), None);
        let shifted: Vec<f64> = two_point().iter().map(|x| x - 500.0).collect();
        assert_relative_eq!(log_var_lik(&shifted).unwrap().unwrap(), 0.02f64.ln() - 1000.0, epsilon = 1e-9);
    }

    #[test]
    fn log_var_lik_resolves_nearly_equal_draws() {
        // Naive exp-then-variance loses every digit here.
        let col = [-3.0, -3.0 + 1e-12];
        let lv = log_var_lik(&col).unwrap().unwrap();
        // V[e^x] ~ e^{2x} * 1e-24 / 2
        let expected = -6.0 + (1e-24f64 / 2.0).ln();
        assert_relative_eq!(lv, expected, epsilon = 1e-3);
    }

    #[test]
    fn wapdi_fixtures() {
        assert_relative_eq!(wapdi(&two_point()).unwrap().unwrap(), -0.199529, epsilon = 1e-6);
        assert_eq!(wapdi(&[-0.5; 3]).unwrap(), Some(0.0));
        let col = [0.5f64.ln(), 0.5f64.ln(), 0.125f64.ln()];
        // sample variance of {a, a, a - ln 4} is (ln 4)^2 / 3 = 0.640604
        assert_relative_eq!(wapdi(&col).unwrap().unwrap(), -0.653125, epsilon = 1e-6);
        // log_mu = 0 exactly
        assert_eq!(wapdi(&[0.0, 0.0]).unwrap(), None);
        assert_eq!(wapdi_with_epsilon(&[0.0, 0.0], 0.0).unwrap(), None);
    }

    #[test]
    fn pdi_ratio_fixtures() {
        let r = pdi_ratio(&two_point()).unwrap().unwrap();
        assert_relative_eq!(r, (0.02f64 / 0.3).ln(), epsilon = 1e-12);
        assert_relative_eq!(linear_value(r).unwrap(), 0.02 / 0.3, epsilon = 1e-12);
        assert_eq!(pdi_ratio(&[-1.0, -1.0]).unwrap(), None);
        let k = 3.7f64;
        let scaled: Vec<f64> = two_point().iter().map(|x| x + k.ln()).collect();
        assert_relative_eq!(pdi_ratio(&scaled).unwrap().unwrap(), r + k.ln(), epsilon = 1e-12);
        assert_eq!(linear_value(1e4), None);
    }

    #[test]
    fn waic_fixtures() {
        let m = LogLikMatrix::from_columns(ids(1), vec![two_point()]).unwrap();
        let w = waic(&m).unwrap();
        assert_relative_eq!(w.value.unwrap(), 1.444200, epsilon = 1e-6);

        let m = LogLikMatrix::from_columns(ids(3), vec![vec![-2.5; 4]; 3]).unwrap();
        assert_eq!(waic(&m).unwrap().value, Some(2.5));

        let m = LogLikMatrix::from_columns(ids(2), vec![two_point(), two_point()]).unwrap();
        assert_relative_eq!(waic(&m).unwrap().value.unwrap(), 1.444200, epsilon = 1e-6);
    }

    #[test]
    fn summarize_two_by_two() {
        let rows = vec![vec![0.2f64.ln(), 0.5f64.ln()], vec![0.4f64.ln(), 0.5f64.ln()]];
        let m = LogLikMatrix::from_rows(ids(2), &rows).unwrap();
        let s = summarize(&m, &EstimatorConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_relative_eq!(s[0].wapdi.unwrap(), -0.199529, epsilon = 1e-6);
        assert_eq!(s[1].wapdi, Some(0.0));
        assert_eq!(s[1].log_mu, 0.5f64.ln());
        assert!(s[1].flags.contains(Flags::ZERO_VARIANCE));
        assert!(s[0].flags.is_empty());
    }

    #[test]
    fn matrix_validation() {
        assert_eq!(LogLikMatrix::from_rows(ids(1), &[vec![-1.0]]), Err(PdiError::TooFewDraws(1)));
        assert_eq!(LogLikMatrix::from_rows(vec![], &[vec![], vec![]]), Err(PdiError::NoDatapoints));
        assert!(matches!(
            LogLikMatrix::from_rows(ids(2), &[vec![-1.0, -1.0], vec![-1.0]]),
            Err(PdiError::RaggedRow { row: 1, .. })
        ));
        assert_eq!(
            LogLikMatrix::from_rows(ids(1), &[vec![-1.0], vec![f64::NEG_INFINITY]]),
            Err(PdiError::ZeroLikelihood { draw: 1 })
        );
        let dup = vec!["a".to_string(), "a".to_string()];
        assert_eq!(
            LogLikMatrix::from_rows(dup, &[vec![-1.0, -1.0], vec![-1.0, -1.0]]),
            Err(PdiError::DuplicateId("a".into()))
        );
    }

    #[test]
    fn flag_mode_keeps_zero_likelihood_columns() {
        let rows = vec![vec![-1.0, f64::NEG_INFINITY], vec![-2.0, -1.5]];
        let m = LogLikMatrix::from_rows_with(ids(2), &rows, ZeroLikelihood::Flag).unwrap();
        let s = summarize(&m, &EstimatorConfig::default()).unwrap();
        assert!(s[0].flags.is_empty());
        assert!(s[1].flags.contains(Flags::ZERO_LIKELIHOOD));
        assert_relative_eq!(s[1].log_mu, (0.5 * (-1.5f64).exp()).ln(), epsilon = 1e-12);
        assert_eq!(s[1].sigma2_log, None);
        assert_eq!(s[1].wapdi, None);
        assert_eq!(s[1].waic_term, None);
        assert!(s[1].log_sigma2.is_some());
        assert_eq!(waic(&m).unwrap().value, None);
    }

    fn summary_with(wapdi: f64, log_mu: f64) -> PointwiseSummary {
        PointwiseSummary {
            log_mu,
            mu_log: log_mu,
            log_sigma2: None,
            sigma2_log: Some(0.0),
            wapdi: Some(wapdi),
            pdi_ratio_log: None,
            waic_term: Some(-log_mu),
            flags: Flags::NONE,
        }
    }

    #[test]
    fn rank_by_wapdi() {
        let s = vec![summary_with(-0.1, -1.0), summary_with(-0.3, -1.0)];
        let r = rank_report(&s, &ids(2), None).unwrap();
        assert_eq!(r.rows[0].id, "p1");
        assert_eq!((r.rows[0].rank_wapdi, r.rows[1].rank_wapdi), (1, 2));
        assert_eq!(r.waic, Some(1.0));
    }

    #[test]
    fn rank_ties_break_on_log_mu_then_id() {
        let s = vec![
            summary_with(-0.2, -1.0),
            summary_with(-0.2, -3.0),
            summary_with(-0.2, -1.0),
            summary_with(-0.2, -2.0),
        ];
        let names: Vec<String> = ["d", "c", "a", "b"].iter().map(|s| s.to_string()).collect();
        let r = rank_report(&s, &names, None).unwrap();
        let order: Vec<&str> = r.rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(order, ["c", "b", "a", "d"]);
        let log_mu_ranks: Vec<usize> = r.rows.iter().map(|r| r.rank_log_mu).collect();
        assert_eq!(log_mu_ranks, [1, 2, 3, 4]);
    }

    #[test]
    fn undefined_wapdi_ranks_last() {
        let mut s = vec![summary_with(-0.2, -1.0), summary_with(-0.1, -1.0)];
        s[0].wapdi = None;
        let r = rank_report(&s, &ids(2), None).unwrap();
        assert_eq!(r.rows[1].id, "p0");
    }

    #[test]
    fn rank_rejects_duplicates_and_length_mismatch() {
        let s = vec![summary_with(-0.1, -1.0), summary_with(-0.3, -1.0)];
        let dup = vec!["x".to_string(), "x".to_string()];
        assert_eq!(rank_report(&s, &dup, None), Err(PdiError::DuplicateId("x".into())));
        assert!(matches!(rank_report(&s, &ids(1), None), Err(PdiError::IdCount { .. })));
    }

    #[test]
    fn top_k_truncates() {
        let s: Vec<_> = (0..6).map(|i| summary_with(-0.1 * i as f64, -1.0)).collect();
        let r = rank_report(&s, &ids(6), None).unwrap().top_k(5);
        assert_eq!(r.rows.len(), 5);
        assert_eq!(r.rows[0].id, "p5");
    }

    #[test]
    fn group_means() {
        let s = vec![summary_with(-0.2, -1.0), summary_with(-0.4, -3.0), summary_with(-0.1, -2.0)];
        let labels: BTreeMap<String, String> =
            [("p0", "wy"), ("p1", "wy"), ("p2", "nv")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let r = rank_report(&s, &ids(3), Some(&labels)).unwrap();
        assert_eq!(report_grouping(&r), labels);
        let g = group_aggregate(&r, &labels).unwrap();
        assert_eq!(g.keys().collect::<Vec<_>>(), ["nv", "wy"]);
        assert_relative_eq!(g["wy"].mean_wapdi.unwrap(), -0.3, epsilon = 1e-15);
        assert_eq!(g["wy"].mean_log_mu, -2.0);
        assert_eq!(g["wy"].count, 2);
        assert_eq!(g["nv"].mean_wapdi, Some(-0.1));

        let one: BTreeMap<String, String> = ids(3).into_iter().map(|i| (i, "all".to_string())).collect();
        let g = group_aggregate(&r, &one).unwrap();
        assert_relative_eq!(g["all"].mean_wapdi.unwrap(), -0.7 / 3.0, epsilon = 1e-15);
        assert_eq!(g["all"].mean_log_mu, -2.0);

        let partial: BTreeMap<String, String> = [("p0".to_string(), "a".to_string())].into_iter().collect();
        assert_eq!(group_aggregate(&r, &partial), Err(PdiError::MissingGroup("p1".into())));
    }

    #[test]
    fn flags_round_trip_through_text() {
        let mut f = Flags::ZERO_VARIANCE;
        f.insert(Flags::ZERO_LIKELIHOOD);
        assert_eq!(f.to_string(), "zero_variance|zero_likelihood");
        assert_eq!(Flags::parse(&f.to_string()), Some(f));
        assert_eq!(Flags::parse(""), Some(Flags::NONE));
        assert_eq!(Flags::parse("bogus"), None);
    }
}
