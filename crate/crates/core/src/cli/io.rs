//! File formats: log-likelihood matrices, summary tables, datasets.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::CliError;
use crate::models::Survey;
use crate::pdi::{Flags, GroupStats, LogLikMatrix, MismatchReport, PointwiseSummary, ReportRow, ZeroLikelihood};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "id",
    "log_mu",
    "mu_log",
    "sigma2_log",
    "log_sigma2",
    "wapdi",
    "pdi_log",
    "waic_term",
    "rank_wapdi",
    "rank_logpred",
    "flags",
];

/// `# pdikit <version> seed=<seed>`, the first line of every text output.
pub fn provenance_line(seed: u64) -> String {
    format!("pdikit {VERSION} seed={seed}")
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let at = e.position().map(|p| format!(" (line {})", p.line())).unwrap_or_default();
    CliError::Input(format!("{}{at}: {e}", path.display()))
}

/// Header row of datapoint ids, then one posterior draw per row.
pub fn read_loglik_csv(path: &Path, policy: ZeroLikelihood) -> Result<LogLikMatrix, CliError> {
    parse_loglik_csv(&read_text(path)?, path, policy)
}

pub fn parse_loglik_csv(text: &str, path: &Path, policy: ZeroLikelihood) -> Result<LogLikMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let ids: Vec<String> =
        reader.headers().map_err(|e| csv_error(path, e))?.iter().map(|s| s.trim().to_string()).collect();
    if ids.iter().all(|s| s.is_empty()) {
        return Err(CliError::Input(format!("{}: missing header of datapoint ids", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != ids.len() {
            return Err(CliError::Input(format!(
                "{}: line {line}: {} fields, expected {}",
                path.display(),
                record.len(),
                ids.len()
            )));
        }
        let mut row = Vec::with_capacity(ids.len());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: line {line}, column {}: `{cell}` is not a number",
                    path.display(),
                    col + 1
                ))
            })?;
            let bad = if value.is_nan() {
                Some("NaN")
            } else if value == f64::INFINITY {
                Some("+inf")
            } else if value == f64::NEG_INFINITY && policy == ZeroLikelihood::Reject {
                Some("-inf (zero likelihood; pass --flag-zero-likelihood to keep it)")
            } else {
                None
            };
            if let Some(what) = bad {
                return Err(CliError::Numerical(format!(
                    "{}: line {line}, column {}: log-likelihood is {what}",
                    path.display(),
                    col + 1
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need at least 2 posterior draws, got {}",
            path.display(),
            rows.len()
        )));
    }
    LogLikMatrix::from_rows_with(ids, &rows, policy).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Inverse of [`parse_loglik_csv`].
pub fn write_loglik_csv<W: Write>(out: W, matrix: &LogLikMatrix) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(matrix.ids())?;
    for s in 0..matrix.draw_count() {
        w.write_record(matrix.row(s).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(report: &MismatchReport, seed: u64) -> Vec<u8> {
    let mut buf = format!("# {}\n", provenance_line(seed)).into_bytes();
    let grouped = report.rows.iter().any(|r| r.group.is_some());
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<&str> = SUMMARY_COLUMNS.to_vec();
        if grouped {
            header.push("group");
        }
        w.write_record(&header).expect("write to Vec");
        for row in &report.rows {
            let s = &row.summary;
            let mut rec = vec![
                row.id.clone(),
                s.log_mu.to_string(),
                s.mu_log.to_string(),
                opt(s.sigma2_log),
                opt(s.log_sigma2),
                opt(s.wapdi),
                opt(s.pdi_ratio_log),
                opt(s.waic_term),
                row.rank_wapdi.to_string(),
                row.rank_log_mu.to_string(),
                s.flags.to_string(),
            ];
            if grouped {
                rec.push(row.group.clone().unwrap_or_default());
            }
            w.write_record(&rec).expect("write to Vec");
        }
        w.flush().expect("write to Vec");
    }
    buf
}

/// A summary table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFile {
    pub version: Option<String>,
    pub seed: Option<u64>,
    pub report: MismatchReport,
}

pub fn read_summary_csv(path: &Path) -> Result<SummaryFile, CliError> {
    parse_summary_csv(&read_text(path)?, path)
}

pub fn parse_summary_csv(text: &str, path: &Path) -> Result<SummaryFile, CliError> {
    let (mut version, mut seed) = (None, None);
    if let Some(first) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
        for token in first.split_whitespace() {
            if let Some(v) = token.strip_prefix("seed=") {
                seed = v.parse().ok();
            } else if token != "pdikit" && version.is_none() {
                version = Some(token.to_string());
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let index = |name: &str| header.iter().position(|h| h == name);
    let mut cols = Vec::with_capacity(SUMMARY_COLUMNS.len());
    for name in SUMMARY_COLUMNS {
        cols.push(index(name).ok_or_else(|| CliError::Input(format!("{}: missing column `{name}`", path.display())))?);
    }
    let group_col = index("group");

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |k: usize| record.get(cols[k]).unwrap_or("").trim();
        let bad = |k: usize| {
            CliError::Input(format!(
                "{}: line {line}, column {}: bad `{}` value `{}`",
                path.display(),
                cols[k] + 1,
                SUMMARY_COLUMNS[k],
                cell(k)
            ))
        };
        let float = |k: usize| cell(k).parse::<f64>().map_err(|_| bad(k));
        let opt_float = |k: usize| if cell(k).is_empty() { Ok(None) } else { float(k).map(Some) };
        let rank = |k: usize| cell(k).parse::<usize>().map_err(|_| bad(k));
        let summary = PointwiseSummary {
            log_mu: float(1)?,
            mu_log: float(2)?,
            sigma2_log: opt_float(3)?,
            log_sigma2: opt_float(4)?,
            wapdi: opt_float(5)?,
            pdi_ratio_log: opt_float(6)?,
            waic_term: opt_float(7)?,
            flags: Flags::parse(cell(10)).ok_or_else(|| bad(10))?,
        };
        rows.push(ReportRow {
            id: record.get(cols[0]).unwrap_or("").to_string(),
            summary,
            rank_wapdi: rank(8)?,
            rank_log_mu: rank(9)?,
            group: group_col.and_then(|g| record.get(g)).filter(|g| !g.is_empty()).map(str::to_string),
        });
    }
    let terms: Vec<f64> = rows.iter().filter_map(|r| r.summary.waic_term).collect();
    let waic = (!terms.is_empty() && terms.len() == rows.len()).then(|| terms.iter().sum::<f64>() / terms.len() as f64);
    Ok(SummaryFile { version, seed, report: MismatchReport { rows, waic } })
}

/// One JSON object per line; the first line carries run metadata.
pub fn summary_ndjson(report: &MismatchReport, seed: u64) -> Vec<u8> {
    let mut out = Vec::new();
    let meta = serde_json::json!({
        "tool": "pdikit",
        "version": VERSION,
        "seed": seed,
        "waic": report.waic,
        "rows": report.rows.len(),
    });
    writeln!(out, "{meta}").expect("write to Vec");
    for row in &report.rows {
        let s = &row.summary;
        let obj = serde_json::json!({
            "id": row.id,
            "log_mu": s.log_mu,
            "mu_log": s.mu_log,
            "sigma2_log": s.sigma2_log,
            "log_sigma2": s.log_sigma2,
            "wapdi": s.wapdi,
            "pdi_log": s.pdi_ratio_log,
            "waic_term": s.waic_term,
            "rank_wapdi": row.rank_wapdi,
            "rank_logpred": row.rank_log_mu,
            "flags": s.flags.to_string(),
            "group": row.group,
        });
        writeln!(out, "{obj}").expect("write to Vec");
    }
    out
}

pub fn groups_csv(stats: &BTreeMap<String, GroupStats>, seed: u64) -> Vec<u8> {
    let mut buf = format!("# {}\n", provenance_line(seed)).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["group", "count", "mean_wapdi", "mean_log_mu"]).expect("write to Vec");
        for (label, g) in stats {
            w.write_record([label.clone(), g.count.to_string(), opt(g.mean_wapdi), g.mean_log_mu.to_string()])
                .expect("write to Vec");
        }
        w.flush().expect("write to Vec");
    }
    buf
}

/// Column `column` of a CSV with an `id` column, as an id -> label map.
pub fn read_group_file(path: &Path, column: &str) -> Result<BTreeMap<String, String>, CliError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_col = header
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| CliError::Input(format!("{}: missing column `id`", path.display())))?;
    let col = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::Input(format!("{}: missing column `{column}`", path.display())))?;
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let id = record.get(id_col).unwrap_or("").to_string();
        let label = record.get(col).unwrap_or("").to_string();
        if map.insert(id.clone(), label).is_some() {
            let line = record.position().map_or(0, |p| p.line());
            return Err(CliError::Input(format!("{}: line {line}: duplicate id `{id}`", path.display())));
        }
    }
    Ok(map)
}

/// Rows of a dataset CSV with named-column access and located errors.
struct Table {
    path: String,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, CliError> {
        let text = read_text(path)?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record.iter().map(|c| c.trim().to_string()).collect()));
        }
        Ok(Table { path: path.display().to_string(), header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize, CliError> {
        self.column(name).ok_or_else(|| CliError::Input(format!("{}: missing column `{name}`", self.path)))
    }

    fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<Vec<T>, CliError> {
        self.rows
            .iter()
            .map(|(line, cells)| {
                let cell = cells.get(col).map(String::as_str).unwrap_or("");
                cell.parse().map_err(|_| {
                    CliError::Input(format!(
                        "{}: line {line}, column {}: bad `{}` value `{cell}`",
                        self.path,
                        col + 1,
                        self.header[col]
                    ))
                })
            })
            .collect()
    }

    fn strings(&self, col: usize) -> Vec<String> {
        self.rows.iter().map(|(_, cells)| cells.get(col).cloned().unwrap_or_default()).collect()
    }
}

/// `days` column, ids from `id`, else disambiguated `name`, else row number.
pub fn read_counts_csv(path: &Path) -> Result<(Vec<String>, Vec<u64>), CliError> {
    let table = Table::read(path)?;
    let days = table.parse(table.require("days")?)?;
    let ids = if let Some(c) = table.column("id") {
        table.strings(c)
    } else if let Some(c) = table.column("name") {
        crate::models::disambiguate(&table.strings(c))
    } else {
        (1..=days.len()).map(|i| i.to_string()).collect()
    };
    Ok((ids, days))
}

/// Positive observations in column `x`.
pub fn read_positive_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let table = Table::read(path)?;
    table.parse(table.require("x")?)
}

/// `vote,sex,race,state[,age,edu]`.
pub fn read_survey_csv(path: &Path) -> Result<Survey, CliError> {
    let table = Table::read(path)?;
    let optional = |name: &str| table.column(name).map(|c| table.parse::<u32>(c)).transpose();
    Ok(Survey {
        vote: table.parse(table.require("vote")?)?,
        female: table.parse(table.require("sex")?)?,
        black: table.parse(table.require("race")?)?,
        state: table.strings(table.require("state")?),
        age: optional("age")?,
        edu: optional("edu")?,
    })
}

pub fn survey_csv(survey: &Survey) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["vote", "sex", "race", "state"];
        if survey.age.is_some() {
            header.push("age");
        }
        if survey.edu.is_some() {
            header.push("edu");
        }
        w.write_record(&header).expect("write to Vec");
        for i in 0..survey.len() {
            let mut rec = vec![
                survey.vote[i].to_string(),
                survey.female[i].to_string(),
                survey.black[i].to_string(),
                survey.state[i].clone(),
            ];
            if let Some(age) = &survey.age {
                rec.push(age[i].to_string());
            }
            if let Some(edu) = &survey.edu {
                rec.push(edu[i].to_string());
            }
            w.write_record(&rec).expect("write to Vec");
        }
        w.flush().expect("write to Vec");
    }
    buf
}

pub fn positive_csv(data: &[f64]) -> Vec<u8> {
    let mut out = String::from("x\n");
    for x in data {
        out.push_str(&format!("{x}\n"));
    }
    out.into_bytes()
}
