//! Temporal Taylor's law: `var = a * mean^b` across the accounts of a slice,
//! one (mean, variance) point per account's hourly series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::HourlySeries;
use crate::error::{Error, Result};
use crate::model::{InteractionCategory, Role};
use crate::ols::fit_line;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorPoint {
    pub account_id: String,
    pub mu: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorFit {
    /// Exponent `b`.
    pub b: f64,
    pub log_a: f64,
    pub a: f64,
    pub r2: f64,
    pub n_accounts: usize,
    pub b_se: Option<f64>,
    pub log_a_se: Option<f64>,
}

/// Mean and unbiased variance over all bins, zeros included.
pub fn mean_variance(counts: &[f64]) -> Result<(f64, f64)> {
    let t = counts.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "mean/variance needs at least 2 bins, got {t}"
        )));
    }
    let mu = counts.iter().sum::<f64>() / t as f64;
    let var = counts.iter().map(|c| (c - mu).powi(2)).sum::<f64>() / (t as f64 - 1.0);
    Ok((mu, var))
}

pub fn series_point(series: &HourlySeries) -> Result<TaylorPoint> {
    let (mu, var) = mean_variance(&series.as_f64())?;
    Ok(TaylorPoint {
        account_id: series.account_id.clone(),
        mu,
        var,
    })
}

/// Base-10 log-log OLS of variance on mean over points with positive mean
/// and variance.
pub fn fit_taylor(points: &[TaylorPoint]) -> Result<TaylorFit> {
    let mut usable: Vec<&TaylorPoint> = points.iter().filter(|p| p.mu > 0.0 && p.var > 0.0).collect();
    // canonical order keeps the floating-point sums independent of input order
    usable.sort_by(|x, y| {
        x.mu.total_cmp(&y.mu)
            .then(x.var.total_cmp(&y.var))
            .then_with(|| x.account_id.cmp(&y.account_id))
    });
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Taylor fit needs at least 3 accounts with positive mean and variance, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.mu.log10()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.var.log10()).collect();
    let line = fit_line(&xs, &ys).map_err(|_| {
        Error::InsufficientData("all accounts share the same mean activity".into())
    })?;
    Ok(TaylorFit {
        b: line.slope,
        log_a: line.intercept,
        a: 10f64.powf(line.intercept),
        r2: line.r2,
        n_accounts: line.n,
        b_se: line.slope_se,
        log_a_se: line.intercept_se,
    })
}

/// Fit of one slice together with the account bookkeeping behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorCell {
    pub category: InteractionCategory,
    pub period: usize,
    pub role: Role,
    pub activity_floor: usize,
    pub accounts_in_slice: usize,
    /// Accounts above the floor but with zero mean or variance.
    pub excluded_flat: usize,
    /// `None` marks an absent cell; `reason` then says why.
    pub fit: Option<TaylorFit>,
    pub reason: Option<String>,
}

/// Points of every series with at least `activity_floor` non-zero bins.
pub fn slice_points(series: &[HourlySeries], activity_floor: usize) -> Result<Vec<TaylorPoint>> {
    series
        .par_iter()
        .filter(|s| s.active_bins() >= activity_floor)
        .map(series_point)
        .collect()
}

pub struct TaylorSlice<'a> {
    pub category: InteractionCategory,
    pub period: usize,
    pub role: Role,
    /// Every account of the slice; the floor is applied here.
    pub series: &'a [HourlySeries],
    /// Accounts dropped before dense series were materialised.
    pub pre_filtered: usize,
}

pub fn taylor_cell(slice: &TaylorSlice<'_>, activity_floor: usize) -> Result<(TaylorCell, Vec<TaylorPoint>)> {
    let points = slice_points(slice.series, activity_floor)?;
    let flat = points.iter().filter(|p| !(p.mu > 0.0 && p.var > 0.0)).count();
    let (fit, reason) = match fit_taylor(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok((
        TaylorCell {
            category: slice.category,
            period: slice.period,
            role: slice.role,
            activity_floor,
            accounts_in_slice: slice.series.len() + slice.pre_filtered,
            excluded_flat: flat,
            fit,
            reason,
        },
        points,
    ))
}

/// Grid of cells ordered by category, role, then period.
pub fn taylor_report(slices: &[TaylorSlice<'_>], activity_floor: usize) -> Result<Vec<TaylorCell>> {
    let mut cells = slices
        .iter()
        .map(|s| taylor_cell(s, activity_floor).map(|(c, _)| c))
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by_key(|c| (c.category, c.role, c.period));
    Ok(cells)
}
