//! Hierarchical logistic regression for survey votes.
//!
//! `P(y_n = 1) = sigmoid(b_female * female_n + b_black * black_n
//!                       + alpha_state[s[n]] (+ alpha_group[g[n]]))`
//!
//! with `b ~ N(0, 1)`, `alpha_state[j] ~ N(mu_state, sigma_state)`,
//! `mu_state ~ N(0, 10)`, `sigma_state ~ N+(0, 10)`, and the same
//! hierarchical prior on the optional age or education block.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelError;
use crate::math::{log_sigmoid, normal_log_pdf};
use crate::model::{Model, PointwiseLikelihood};
use crate::transform::{ParamBlock, ParamLayout, Transform};

const HYPER_SD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    WithAge,
    WithEdu,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::WithAge => "with_age",
            Variant::WithEdu => "with_edu",
        }
    }

    /// Name of the extra categorical block, if any.
    pub fn group_field(self) -> Option<&'static str> {
        match self {
            Variant::Base => None,
            Variant::WithAge => Some("age"),
            Variant::WithEdu => Some("edu"),
        }
    }
}

/// Survey rows in the input schema: vote (1 = Republican), sex
/// (1 = female), race (1 = black), state code, optional age and education
/// category codes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Survey {
    pub vote: Vec<u8>,
    pub female: Vec<u8>,
    pub black: Vec<u8>,
    pub state: Vec<String>,
    pub age: Option<Vec<u32>>,
    pub edu: Option<Vec<u32>>,
}

impl Survey {
    pub fn len(&self) -> usize {
        self.vote.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vote.is_empty()
    }
}

fn check_binary(field: &'static str, xs: &[u8], n: usize) -> Result<(), ModelError> {
    if xs.len() != n {
        return Err(ModelError::Length { field, got: xs.len(), expected: n });
    }
    match xs.iter().position(|&v| v > 1) {
        Some(row) => Err(ModelError::OutOfRange { field, row, value: xs[row].to_string() }),
        None => Ok(()),
    }
}

/// Category codes as contiguous levels `min..=max`; a code in that range
/// with no rows is an error.
fn code_levels(field: &'static str, codes: &[u32]) -> Result<(Vec<usize>, Vec<String>), ModelError> {
    let present: BTreeSet<u32> = codes.iter().copied().collect();
    let (Some(&lo), Some(&hi)) = (present.first(), present.last()) else {
        return Ok((Vec::new(), Vec::new()));
    };
    if let Some(gap) = (lo..=hi).find(|c| !present.contains(c)) {
        return Err(ModelError::EmptyLevel { field, level: gap.to_string() });
    }
    let idx = codes.iter().map(|&c| (c - lo) as usize).collect();
    Ok((idx, (lo..=hi).map(|c| c.to_string()).collect()))
}

#[derive(Debug, Clone)]
pub struct HierLogReg {
    variant: Variant,
    y: Vec<u8>,
    female: Vec<u8>,
    black: Vec<u8>,
    state: Vec<usize>,
    state_names: Vec<String>,
    group: Vec<usize>,
    group_names: Vec<String>,
    layout: ParamLayout,
}

impl HierLogReg {
    pub fn new(survey: &Survey, variant: Variant) -> Result<Self, ModelError> {
        let n = survey.len();
        if survey.state.len() != n {
            return Err(ModelError::Length { field: "state", got: survey.state.len(), expected: n });
        }
        let state_names: Vec<String> = survey.state.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let state: Vec<usize> =
            survey.state.iter().map(|s| state_names.binary_search(s).expect("collected above")).collect();
        let (group, group_names) = match variant {
            Variant::Base => (Vec::new(), Vec::new()),
            Variant::WithAge | Variant::WithEdu => {
                let field = variant.group_field().unwrap();
                let codes = if variant == Variant::WithAge { &survey.age } else { &survey.edu };
                let codes = codes.as_ref().ok_or(ModelError::MissingColumn { variant: variant.label(), field })?;
                if codes.len() != n {
                    return Err(ModelError::Length { field, got: codes.len(), expected: n });
                }
                code_levels(field, codes)?
            }
        };
        Self::from_indices(
            variant,
            survey.vote.clone(),
            survey.female.clone(),
            survey.black.clone(),
            state,
            state_names,
            group,
            group_names,
        )
    }

    /// Build from level indices. Every index must be below its level count
    /// and every level must be observed.
    #[allow(clippy::too_many_arguments)]
    pub fn from_indices(
        variant: Variant,
        y: Vec<u8>,
        female: Vec<u8>,
        black: Vec<u8>,
        state: Vec<usize>,
        state_names: Vec<String>,
        group: Vec<usize>,
        group_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        let n = y.len();
        if n == 0 {
            return Err(ModelError::TooFewPoints { needed: 1, got: 0 });
        }
        check_binary("vote", &y, n)?;
        check_binary("sex", &female, n)?;
        check_binary("race", &black, n)?;
        check_levels("state", &state, &state_names, n)?;
        if let Some(field) = variant.group_field() {
            check_levels(field, &group, &group_names, n)?;
        }

        let mut blocks = vec![
            ParamBlock::new("beta", Transform::Identity, 2),
            ParamBlock::new("alpha_state", Transform::Identity, state_names.len()),
            ParamBlock::new("mu_state", Transform::Identity, 1),
            ParamBlock::new("sigma_state", Transform::Positive, 1),
        ];
        if let Some(field) = variant.group_field() {
            blocks.push(ParamBlock::new(format!("alpha_{field}"), Transform::Identity, group_names.len()));
            blocks.push(ParamBlock::new(format!("mu_{field}"), Transform::Identity, 1));
            blocks.push(ParamBlock::new(format!("sigma_{field}"), Transform::Positive, 1));
        }
        Ok(Self { variant, y, female, black, state, state_names, group, group_names, layout: ParamLayout::new(blocks) })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    /// State code of each observation, for grouping reports.
    pub fn state_labels(&self) -> Vec<String> {
        self.state.iter().map(|&s| self.state_names[s].clone()).collect()
    }

    pub fn group_labels(&self) -> Option<Vec<String>> {
        self.variant.group_field()?;
        Some(self.group.iter().map(|&g| self.group_names[g].clone()).collect())
    }

    fn state_offset(&self) -> usize {
        2
    }

    fn group_offset(&self) -> usize {
        2 + self.state_names.len() + 2
    }

    /// Linear predictor of observation `n`.
    pub fn linear_predictor(&self, n: usize, theta: &[f64]) -> f64 {
        let mut eta = theta[0] * self.female[n] as f64
            + theta[1] * self.black[n] as f64
            + theta[self.state_offset() + self.state[n]];
        if self.variant != Variant::Base {
            eta += theta[self.group_offset() + self.group[n]];
        }
        eta
    }
}

fn check_levels(field: &'static str, idx: &[usize], names: &[String], n: usize) -> Result<(), ModelError> {
    if idx.len() != n {
        return Err(ModelError::Length { field, got: idx.len(), expected: n });
    }
    let mut used = vec![false; names.len()];
    for (row, &i) in idx.iter().enumerate() {
        if i >= names.len() {
            return Err(ModelError::OutOfRange { field, row, value: i.to_string() });
        }
        used[i] = true;
    }
    match used.iter().position(|u| !u) {
        Some(level) => Err(ModelError::EmptyLevel { field, level: names[level].clone() }),
        None => Ok(()),
    }
}

/// `y log sigmoid(eta) + (1 - y) log(1 - sigmoid(eta))`.
pub fn bernoulli_logit_log_lik(y: u8, eta: f64) -> f64 {
    if y == 1 {
        log_sigmoid(eta)
    } else {
        log_sigmoid(-eta)
    }
}

fn hierarchical_log_prior(levels: &[f64], mu: f64, sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let half_normal = normal_log_pdf(sigma, 0.0, HYPER_SD) + 2f64.ln();
    normal_log_pdf(mu, 0.0, HYPER_SD) + half_normal + levels.iter().map(|&a| normal_log_pdf(a, mu, sigma)).sum::<f64>()
}

impl PointwiseLikelihood for HierLogReg {
    fn point_count(&self) -> usize {
        self.y.len()
    }

    fn pointwise_log_lik(&self, n: usize, theta: &[f64]) -> f64 {
        bernoulli_logit_log_lik(self.y[n], self.linear_predictor(n, theta))
    }
}

impl Model for HierLogReg {
    fn name(&self) -> &str {
        match self.variant {
            Variant::Base => "hierlogreg-base",
            Variant::WithAge => "hierlogreg-age",
            Variant::WithEdu => "hierlogreg-edu",
        }
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let j = self.state_names.len();
        let mut lp = normal_log_pdf(theta[0], 0.0, 1.0) + normal_log_pdf(theta[1], 0.0, 1.0);
        let s = self.state_offset();
        lp += hierarchical_log_prior(&theta[s..s + j], theta[s + j], theta[s + j + 1]);
        if self.variant != Variant::Base {
            let g = self.group_offset();
            let k = self.group_names.len();
            lp += hierarchical_log_prior(&theta[g..g + k], theta[g + k], theta[g + k + 1]);
        }
        lp
    }

    fn prior_mean(&self) -> Vec<f64> {
        let half_normal_mean = HYPER_SD * (2.0 / PI).sqrt();
        let mut theta = vec![0.0; self.layout.constrained_dim()];
        let s = self.state_offset() + self.state_names.len();
        theta[s + 1] = half_normal_mean;
        if self.variant != Variant::Base {
            let g = self.group_offset() + self.group_names.len();
            theta[g + 1] = half_normal_mean;
        }
        theta
    }
}

/// Ground-truth latents used to simulate a survey.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyTruth {
    pub beta_female: f64,
    pub beta_black: f64,
    pub alpha_state: Vec<f64>,
    pub alpha_group: Vec<f64>,
}

/// Simulate `n` respondents across `states` states (codes `s01`, `s02`,
/// ...) with known effects: women and black respondents lean Democratic,
/// older and more educated respondents lean Republican.
pub fn simulate_survey(n: usize, states: usize, variant: Variant, seed: u64) -> (Survey, SurveyTruth) {
    assert!(states >= 1 && n >= states, "need at least one respondent per state");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state_effect = Normal::new(0.2, 0.5).unwrap();
    let alpha_state: Vec<f64> = (0..states).map(|_| state_effect.sample(&mut rng)).collect();
    let group_levels = 4;
    let alpha_group: Vec<f64> = match variant {
        Variant::Base => Vec::new(),
        _ => (0..group_levels).map(|k| -0.6 + 0.4 * k as f64).collect(),
    };
    let truth = SurveyTruth { beta_female: -0.4, beta_black: -1.8, alpha_state, alpha_group };

    let mut survey = Survey::default();
    let mut codes = Vec::with_capacity(n);
    for i in 0..n {
        let female = rng.random_bool(0.5) as u8;
        let black = rng.random_bool(0.12) as u8;
        // cycle the first rows through every state so none is empty
        let s = if i < states { i } else { rng.random_range(0..states) };
        let g = rng.random_range(0..group_levels);
        let mut eta = truth.beta_female * female as f64 + truth.beta_black * black as f64 + truth.alpha_state[s];
        if variant != Variant::Base {
            eta += truth.alpha_group[g];
        }
        let p = crate::math::logistic(eta);
        survey.vote.push(rng.random_bool(p) as u8);
        survey.female.push(female);
        survey.black.push(black);
        survey.state.push(format!("s{:02}", s + 1));
        codes.push(g as u32);
    }
    match variant {
        Variant::Base => {}
        Variant::WithAge => survey.age = Some(codes),
        Variant::WithEdu => survey.edu = Some(codes),
    }
    (survey, truth)
}
