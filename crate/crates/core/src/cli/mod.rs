//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 input format or I/O, 4 numerical
//! failure. Every error is reported on one line starting `pdikit: error:`.

pub mod io;
pub mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::diagnostics::{compare_exact_vs_taylor, finite_difference_gradient};
use crate::model::{loglik_matrix, Model, PointwiseLikelihood};
use crate::models::hierlogreg::simulate_survey;
use crate::models::presidents::presidents_csv;
use crate::models::{GammaGammaToy, HierLogReg, ModelError, Nb2Mixture, Variant};
use crate::pdi::{
    self, group_aggregate, rank_report, EstimatorConfig, LogLikMatrix, MismatchReport, ZeroLikelihood,
    DEFAULT_WAPDI_EPSILON,
};
use crate::sampler::{
    run_chains, sample_gamma_posterior, PosteriorDraws, SamplerConfig, SamplerError, DEFAULT_DRAWS,
    DEFAULT_TARGET_ACCEPTANCE,
};
use io::VERSION;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Config(m) => CliError::Usage(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "pdikit", version, about = "Posterior dispersion indices for Bayesian model criticism")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Summarize a posterior log-likelihood matrix (header of ids, one draw per row).
    Compute(ComputeArgs),
    /// Fit a built-in model and summarize its datapoints.
    Fit(FitArgs),
    /// Print the worst rows of an existing summary.csv.
    Report(ReportArgs),
    /// Compare exact WAPDI with its first-order Taylor approximation on the gamma toy model.
    CheckLemma(CheckLemmaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Ndjson,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    PresidentsNb2,
    GammaToy,
    HierlogregBase,
    HierlogregAge,
    HierlogregEdu,
}

impl ModelName {
    fn variant(self) -> Option<Variant> {
        match self {
            ModelName::HierlogregBase => Some(Variant::Base),
            ModelName::HierlogregAge => Some(Variant::WithAge),
            ModelName::HierlogregEdu => Some(Variant::WithEdu),
            _ => None,
        }
    }

    /// `(warmup, thin)` when not given on the command line.
    fn sampler_defaults(self) -> (usize, usize) {
        match self {
            ModelName::PresidentsNb2 => (5000, 10),
            ModelName::GammaToy => (0, 1),
            _ => (2000, 2),
        }
    }

    fn default_synthetic_n(self) -> usize {
        match self {
            ModelName::GammaToy => 10,
            _ => 5000,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComputeArgs {
    /// Log-likelihood matrix CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    pub format: Vec<Format>,
    /// CSV with an `id` column and one or more grouping columns.
    #[arg(long, requires = "group_by")]
    pub groups: Option<PathBuf>,
    /// Grouping column of `--groups` to aggregate by.
    #[arg(long, requires = "groups")]
    pub group_by: Option<String>,
    /// Keep columns with -inf entries and flag them instead of failing.
    #[arg(long)]
    pub flag_zero_likelihood: bool,
    #[arg(long, default_value_t = DEFAULT_WAPDI_EPSILON)]
    pub wapdi_epsilon: f64,
    /// Recorded in the outputs; nothing is sampled.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    /// Dataset CSV; the embedded or a simulated dataset otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Kept posterior draws per chain.
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    pub draws: usize,
    /// Warmup iterations (model default if omitted).
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Keep every k-th post-warmup iteration (model default if omitted).
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial random-walk step size.
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TARGET_ACCEPTANCE)]
    pub target_accept: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    pub format: Vec<Format>,
    /// Aggregate by a model grouping (`state`, `age`, `edu`).
    #[arg(long)]
    pub group_by: Option<String>,
    /// Also write the dataset used to `data.csv`.
    #[arg(long)]
    pub dump_data: bool,
    /// Size of the simulated dataset when `--data` is absent.
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_WAPDI_EPSILON)]
    pub wapdi_epsilon: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// A summary.csv written by `compute` or `fit`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Write report files here instead of printing to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    pub format: Vec<Format>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckLemmaArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Size of the simulated Gam(5, 1) dataset.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Exact posterior draws.
    #[arg(long, default_value_t = 20000)]
    pub draws: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A command-line parse failure, or a request for help/version text.
#[derive(Debug)]
pub struct UsageError(pub clap::Error);

impl UsageError {
    /// `--help` and `--version` are not failures.
    pub fn is_informational(&self) -> bool {
        matches!(self.0.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion)
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_informational() {
            0
        } else {
            2
        }
    }

    /// The clap message with its `error: ` prefix removed, on one line.
    /// Continuation lines (missing arguments, possible values) are joined.
    pub fn message(&self) -> String {
        let rendered = self.0.render().to_string();
        let mut parts: Vec<&str> = Vec::new();
        for line in rendered.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("Usage:") || line.starts_with("For more information") {
                if parts.is_empty() {
                    continue;
                }
                break;
            }
            parts.push(line);
        }
        if let Some(hint) = rendered.lines().map(str::trim).find(|l| l.starts_with("[possible values")) {
            if !parts.contains(&hint) {
                parts.push(hint);
            }
        }
        let joined = parts.join(" ");
        joined.strip_prefix("error: ").unwrap_or(&joined).to_string()
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    RunConfig::try_parse_from(argv).map_err(UsageError)
}

/// Run a parsed configuration; returns the process exit code.
pub fn run_pipeline(config: &RunConfig) -> i32 {
    match run(config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pdikit: error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match &config.command {
        Command::Compute(args) => compute(args, config),
        Command::Fit(args) => fit(args, config),
        Command::Report(args) => report(args),
        Command::CheckLemma(args) => check_lemma(args, config),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn check_epsilon(eps: f64) -> Result<(), CliError> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--wapdi-epsilon must be finite and non-negative, got {eps}")))
    }
}

fn summarize_matrix(
    matrix: &LogLikMatrix,
    eps: f64,
    grouping: Option<&BTreeMap<String, String>>,
) -> Result<MismatchReport, CliError> {
    let summaries = pdi::summarize(matrix, &EstimatorConfig { wapdi_epsilon: eps })
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    if let Some(g) = grouping {
        if let Some(id) = matrix.ids().iter().find(|id| !g.contains_key(*id)) {
            return Err(CliError::Input(format!("datapoint `{id}` has no group label")));
        }
    }
    rank_report(&summaries, matrix.ids(), grouping).map_err(|e| CliError::Input(e.to_string()))
}

fn write_report_files(
    dir: &Path,
    stem: &str,
    report: &MismatchReport,
    formats: &[Format],
    seed: u64,
) -> Result<(), CliError> {
    for format in formats {
        match format {
            Format::Csv => write_file(dir, &format!("{stem}.csv"), &io::summary_csv(report, seed))?,
            Format::Ndjson => write_file(dir, &format!("{stem}.ndjson"), &io::summary_ndjson(report, seed))?,
            Format::Svg => write_file(dir, "wapdi.svg", plot::wapdi_svg(report, seed).as_bytes())?,
        }
    }
    Ok(())
}

fn write_groups(
    dir: &Path,
    report: &MismatchReport,
    grouping: &BTreeMap<String, String>,
    seed: u64,
) -> Result<(), CliError> {
    let stats = group_aggregate(report, grouping).map_err(|e| CliError::Input(e.to_string()))?;
    write_file(dir, "groups.csv", &io::groups_csv(&stats, seed))
}

fn run_json(config: &RunConfig, seed: u64, report: &MismatchReport, extra: serde_json::Value) -> Vec<u8> {
    let mut value = json!({
        "tool": "pdikit",
        "version": VERSION,
        "seed": seed,
        "config": config,
        "waic": report.waic,
        "datapoints": report.rows.len(),
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.extend(more);
    }
    let mut bytes = serde_json::to_vec_pretty(&value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn compute(args: &ComputeArgs, config: &RunConfig) -> Result<(), CliError> {
    check_epsilon(args.wapdi_epsilon)?;
    let policy = if args.flag_zero_likelihood { ZeroLikelihood::Flag } else { ZeroLikelihood::Reject };
    let matrix = io::read_loglik_csv(&args.input, policy)?;
    let grouping = match (&args.groups, &args.group_by) {
        (Some(path), Some(col)) => Some(io::read_group_file(path, col)?),
        _ => None,
    };
    let report = summarize_matrix(&matrix, args.wapdi_epsilon, grouping.as_ref())?;
    create_dir(&args.out)?;
    write_report_files(&args.out, "summary", &report, &args.format, args.seed)?;
    if let Some(g) = &grouping {
        write_groups(&args.out, &report, g, args.seed)?;
    }
    let extra = json!({ "draws": matrix.draw_count(), "zero_likelihood": policy });
    write_file(&args.out, "run.json", &run_json(config, args.seed, &report, extra))
}

/// A built-in model with its data, ready to sample.
enum Fitted {
    Presidents(Nb2Mixture),
    Toy(GammaGammaToy),
    Logistic(HierLogReg),
}

fn load_model(args: &FitArgs) -> Result<(Fitted, Vec<u8>), CliError> {
    let n = args.synthetic_n.unwrap_or(args.model.default_synthetic_n());
    if args.synthetic_n.is_some() && args.data.is_some() {
        return Err(CliError::Usage("--synthetic-n and --data are mutually exclusive".into()));
    }
    match args.model {
        ModelName::PresidentsNb2 => {
            if args.synthetic_n.is_some() {
                return Err(CliError::Usage(
                    "presidents-nb2 uses a fixed dataset; --synthetic-n does not apply".into(),
                ));
            }
            match &args.data {
                Some(path) => {
                    let (ids, days) = io::read_counts_csv(path)?;
                    let mut dump = String::from("id,days\n");
                    for (id, d) in ids.iter().zip(&days) {
                        dump.push_str(&format!("{id},{d}\n"));
                    }
                    Ok((Fitted::Presidents(Nb2Mixture::new(ids, days, 3)?), dump.into_bytes()))
                }
                None => Ok((Fitted::Presidents(Nb2Mixture::presidents()), presidents_csv().into_bytes())),
            }
        }
        ModelName::GammaToy => {
            let data = match &args.data {
                Some(path) => io::read_positive_csv(path)?,
                None => crate::models::toy::simulate_gamma(n, GammaGammaToy::SHAPE, 1.0, args.seed),
            };
            let dump = io::positive_csv(&data);
            Ok((Fitted::Toy(GammaGammaToy::new(data)?), dump))
        }
        name => {
            let variant = name.variant().expect("logistic variants");
            let survey = match &args.data {
                Some(path) => io::read_survey_csv(path)?,
                None => simulate_survey(n, 20, variant, args.seed).0,
            };
            let dump = io::survey_csv(&survey);
            Ok((Fitted::Logistic(HierLogReg::new(&survey, variant)?), dump))
        }
    }
}

fn grouping_for(fitted: &Fitted, column: &str, ids: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    let labels = match fitted {
        Fitted::Logistic(model) if column == "state" => Some(model.state_labels()),
        Fitted::Logistic(model) if Some(column) == model.variant().group_field() => model.group_labels(),
        _ => None,
    };
    let labels = labels.ok_or_else(|| {
        let available = match fitted {
            Fitted::Logistic(model) => {
                let mut cols = vec!["state"];
                cols.extend(model.variant().group_field());
                cols.join(", ")
            }
            _ => "none".to_string(),
        };
        CliError::Usage(format!("--group-by `{column}` is not available for this model (available: {available})"))
    })?;
    Ok(ids.iter().cloned().zip(labels).collect())
}

fn sample<M: Model>(model: &M, args: &FitArgs) -> Result<PosteriorDraws, CliError> {
    let (warmup, thin) = args.model.sampler_defaults();
    let config = SamplerConfig {
        warmup: args.warmup.unwrap_or(warmup),
        draws: args.draws,
        thin: args.thin.unwrap_or(thin),
        initial_step_size: args.step_size,
        target_acceptance: args.target_accept,
        seed: args.seed,
    };
    Ok(run_chains(model, &config, args.chains)?)
}

fn fit(args: &FitArgs, config: &RunConfig) -> Result<(), CliError> {
    check_epsilon(args.wapdi_epsilon)?;
    if args.draws < 2 {
        return Err(CliError::Usage(format!("--draws must be at least 2, got {}", args.draws)));
    }
    let (fitted, dump) = load_model(args)?;
    let (draws, sampler, model_name) = match &fitted {
        Fitted::Presidents(m) => (sample(m, args)?, "adaptive-rwm", m.name().to_string()),
        Fitted::Logistic(m) => (sample(m, args)?, "adaptive-rwm", m.name().to_string()),
        Fitted::Toy(m) => {
            if args.warmup.is_some() || args.thin.is_some() || args.step_size.is_some() {
                return Err(CliError::Usage(
                    "gamma-toy draws exactly from its conjugate posterior; --warmup, --thin and --step-size do not apply"
                        .into(),
                ));
            }
            let (a, b) = m.posterior();
            let chains = args.chains.max(1);
            let parts = (0..chains)
                .map(|c| sample_gamma_posterior(a, b, args.draws, args.seed.wrapping_add(c as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            let mut d = PosteriorDraws::merge(parts);
            d.seed = args.seed;
            (d, "conjugate-exact", m.name().to_string())
        }
    };
    let lik: &dyn PointwiseLikelihood = match &fitted {
        Fitted::Presidents(m) => m,
        Fitted::Toy(m) => m,
        Fitted::Logistic(m) => m,
    };
    let matrix = loglik_matrix(lik, &draws).map_err(|e| CliError::Numerical(e.to_string()))?;
    let grouping = args.group_by.as_deref().map(|c| grouping_for(&fitted, c, matrix.ids())).transpose()?;
    let report = summarize_matrix(&matrix, args.wapdi_epsilon, grouping.as_ref())?;

    create_dir(&args.out)?;
    write_report_files(&args.out, "summary", &report, &args.format, args.seed)?;
    if let Some(g) = &grouping {
        write_groups(&args.out, &report, g, args.seed)?;
    }
    if args.dump_data {
        write_file(&args.out, "data.csv", &dump)?;
    }
    for w in &draws.warnings {
        eprintln!("pdikit: warning: {w}");
    }
    let posterior: Vec<_> = draws
        .names()
        .iter()
        .zip(draws.posterior_mean().iter().zip(draws.posterior_var()))
        .map(|(name, (m, v))| json!({ "name": name, "mean": m, "var": v }))
        .collect();
    let extra = json!({
        "model": model_name,
        "sampler": sampler,
        "draws": draws.len(),
        "acceptance_rate": draws.acceptance_rate,
        "posterior": posterior,
        "warnings": draws.warnings,
    });
    write_file(&args.out, "run.json", &run_json(config, args.seed, &report, extra))
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let file = io::read_summary_csv(&args.input)?;
    let seed = file.seed.unwrap_or(0);
    let report = match args.top_k {
        Some(k) => file.report.top_k(k),
        None => file.report,
    };
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            write_report_files(dir, "report", &report, &args.format, seed)
        }
        None => {
            use std::io::Write;
            let bytes = io::summary_csv(&report, seed);
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

fn check_lemma(args: &CheckLemmaArgs, config: &RunConfig) -> Result<(), CliError> {
    if args.n == 0 || args.draws < 2 {
        return Err(CliError::Usage("--n must be positive and --draws at least 2".into()));
    }
    let toy = GammaGammaToy::simulate(args.n, args.seed)?;
    let (a, b) = toy.posterior();
    let draws = sample_gamma_posterior(a, b, args.draws, args.seed)?;
    let grid: Vec<f64> = (1..=30).map(|i| 0.5 * i as f64).collect();
    let lik = toy.likelihood_at(grid.clone());
    let matrix = loglik_matrix(&lik, &draws).map_err(|e| CliError::Numerical(e.to_string()))?;
    let taylor = compare_exact_vs_taylor(&lik, &draws, &matrix).map_err(|e| CliError::Numerical(e.to_string()))?;

    let beta = draws.posterior_mean()[0];
    let max_gradient_error = grid
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let fd = finite_difference_gradient(&lik, n, &[beta])[0];
            let exact = toy.shape() / beta - x;
            (fd - exact).abs() / exact.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    let spearman = taylor.spearman();

    let mut table = format!("# {}\n", io::provenance_line(args.seed)).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut table);
        w.write_record(["id", "log_mu", "wapdi_exact", "wapdi_taylor", "abs_error", "gradient", "flags"])
            .expect("write to Vec");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &taylor.rows {
            let gradient: Vec<String> = row.gradient.iter().map(|g| g.to_string()).collect();
            w.write_record([
                row.id.clone(),
                row.log_mu.to_string(),
                opt(row.wapdi_exact),
                opt(row.wapdi_taylor),
                opt(row.abs_error),
                gradient.join(";"),
                row.flags.to_string(),
            ])
            .expect("write to Vec");
        }
        w.flush().expect("write to Vec");
    }

    println!("posterior Gam({a}, {b}); {} draws, seed {}", args.draws, args.seed);
    println!("max relative finite-difference gradient error: {max_gradient_error:e}");
    match spearman {
        Some(r) => println!("spearman(exact, taylor) over {} grid points: {r:.4}", taylor.rows.len()),
        None => println!("spearman(exact, taylor): undefined"),
    }
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(dir, "lemma.csv", &table)?;
            let value = json!({
                "tool": "pdikit",
                "version": VERSION,
                "seed": args.seed,
                "config": config,
                "posterior": { "shape": a, "rate": b },
                "spearman": spearman,
                "max_gradient_error": max_gradient_error,
            });
            let mut bytes = serde_json::to_vec_pretty(&value).expect("serializable");
            bytes.push(b'\n');
            write_file(dir, "run.json", &bytes)
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&table).map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}
