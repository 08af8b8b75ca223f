use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::DatasetSummary;
use crate::model::{InteractionCategory, Role};
use crate::powerlaw::TailFitReport;
use crate::scaling::ScalingFit;
use crate::stationarity::StationarySummary;
use crate::taylor::TaylorCell;

pub const SCHEMA_VERSION: &str = "tokenscale.report/1";

/// Disabled stages serialise as `null`, but the key itself is mandatory.
fn present<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingCell {
    pub category: InteractionCategory,
    pub period: usize,
    pub senders: usize,
    pub fit: Option<ScalingFit>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailCell {
    pub category: InteractionCategory,
    pub period: usize,
    pub role: Role,
    pub accounts: usize,
    pub fit: Option<TailFitReport>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarityCell {
    pub category: InteractionCategory,
    pub period: usize,
    pub role: Role,
    pub summary: Option<StationarySummary>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub rng: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
}

/// Everything `analyze` produces, in fixed slice order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub census: DatasetSummary,
    #[serde(deserialize_with = "present")]
    pub scaling: Option<Vec<ScalingCell>>,
    #[serde(deserialize_with = "present")]
    pub tails: Option<Vec<TailCell>>,
    #[serde(deserialize_with = "present")]
    pub stationarity: Option<Vec<StationarityCell>>,
    #[serde(deserialize_with = "present")]
    pub taylor: Option<Vec<TaylorCell>>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invariant(format!("report serialisation: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Parses and validates a report, rejecting missing fields and unknown
    /// schema versions.
    pub fn from_json(text: &str) -> Result<Self> {
        let report: AnalysisReport =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported report schema `{}`",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// Plot-data file name: `<table>_<category>_<period>_<role>.dat`.
pub fn plot_name(table: &str, category: InteractionCategory, period: usize, role: Role) -> String {
    format!("{table}_{}_{period}_{}.dat", category.as_str(), role.as_str())
}

pub(crate) fn write_plot(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let path = dir.join(name);
    let mut text = format!("# {header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&cells.join("\t"));
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let write = || -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Invariant(format!("{}: {other:?}", path.display())),
    })
}

pub fn write_table1(path: &Path, census: &DatasetSummary) -> Result<()> {
    let mut header = vec!["fromIsContract".to_string(), "toIsContract".into(), "category".into()];
    header.extend((1..=census.periods).map(|p| format!("period_{p}")));
    header.push("total".into());
    let mut rows: Vec<Vec<String>> = census
        .categories
        .iter()
        .map(|c| {
            let (s, r) = c.category.flags();
            let mut row = vec![(s as u8).to_string(), (r as u8).to_string(), c.category.to_string()];
            row.extend(c.per_period.iter().map(u64::to_string));
            row.push(c.total.to_string());
            row
        })
        .collect();
    let mut total = vec![String::new(), String::new(), "ALL".into()];
    total.extend(census.period_totals.iter().map(u64::to_string));
    total.push(census.total.to_string());
    rows.push(total);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, rows)
}

pub fn write_tables(dir: &Path, report: &AnalysisReport) -> Result<()> {
    write_table1(&dir.join("table1.csv"), &report.census)?;
    if let Some(cells) = &report.scaling {
        let rows = cells
            .iter()
            .map(|c| {
                let f = c.fit.as_ref();
                vec![
                    c.category.to_string(),
                    c.period.to_string(),
                    c.senders.to_string(),
                    opt(f.map(|f| f.alpha)),
                    opt(f.map(|f| f.intercept)),
                    opt(f.map(|f| f.r2)),
                    f.map(|f| f.n_points.to_string()).unwrap_or_default(),
                    opt(f.and_then(|f| f.alpha_se)),
                    c.reason.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_table(
            &dir.join("table2.csv"),
            &["category", "period", "senders", "alpha", "intercept", "r2", "bins", "alpha_se", "absent_reason"],
            rows,
        )?;
    }
    if let Some(cells) = &report.tails {
        let rows = cells
            .iter()
            .map(|c| {
                let f = c.fit.as_ref();
                let mut row = vec![c.category.to_string(), c.period.to_string(), c.role.to_string(), c.accounts.to_string()];
                match f {
                    Some(f) => row.extend([
                        f.gamma.to_string(),
                        f.x_min.to_string(),
                        f.sigma_gamma.to_string(),
                        f.ks_distance.to_string(),
                        f.llr.to_string(),
                        f.llr_normalized.to_string(),
                        f.p_value.to_string(),
                        f.n_tail.to_string(),
                        f.lambda.to_string(),
                        serde_json::to_value(f.verdict).unwrap().as_str().unwrap_or_default().to_string(),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), 10)),
                }
                row.push(c.reason.clone().unwrap_or_default());
                row
            })
            .collect();
        write_table(
            &dir.join("table3.csv"),
            &[
                "category", "period", "role", "accounts", "gamma", "x_min", "sigma_gamma", "ks_distance", "llr",
                "llr_normalized", "p_value", "n_tail", "lambda", "verdict", "absent_reason",
            ],
            rows,
        )?;
    }
    if let Some(cells) = &report.stationarity {
        let rows = cells
            .iter()
            .map(|c| {
                let s = c.summary.as_ref();
                let count = |f: fn(&StationarySummary) -> usize| s.map(|s| f(s).to_string()).unwrap_or_default();
                vec![
                    c.category.to_string(),
                    c.period.to_string(),
                    c.role.to_string(),
                    count(|s| s.tested),
                    count(|s| s.stationary),
                    count(|s| s.degenerate),
                    count(|s| s.below_floor),
                    opt(s.and_then(|s| s.percentage)),
                    c.reason.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_table(
            &dir.join("table4.csv"),
            &["category", "period", "role", "tested", "stationary", "degenerate", "below_floor", "percentage", "absent_reason"],
            rows,
        )?;
    }
    if let Some(cells) = &report.taylor {
        let rows = cells
            .iter()
            .map(|c| {
                let f = c.fit.as_ref();
                vec![
                    c.category.to_string(),
                    c.period.to_string(),
                    c.role.to_string(),
                    c.accounts_in_slice.to_string(),
                    f.map(|f| f.n_accounts.to_string()).unwrap_or_default(),
                    opt(f.map(|f| f.b)),
                    opt(f.map(|f| f.a)),
                    opt(f.map(|f| f.r2)),
                    opt(f.and_then(|f| f.b_se)),
                    c.reason.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_table(
            &dir.join("table5.csv"),
            &["category", "period", "role", "accounts", "fitted_accounts", "b", "a", "r2", "b_se", "absent_reason"],
            rows,
        )?;
    }
    Ok(())
}

pub(crate) fn write_json(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
