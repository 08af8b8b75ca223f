//! KPSS stationarity test with a Bartlett-kernel long-run variance and the
//! per-slice share of accounts whose hourly activity passes it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::HourlySeries;
use crate::error::{Error, Result};

pub const MIN_LENGTH: usize = 10;
pub const DEFAULT_ACTIVITY_FLOOR: usize = 10;

/// Deterministic component removed before the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KpssVariant {
    /// Stationary around a constant.
    #[default]
    Level,
    /// Stationary around a linear trend.
    Trend,
}

/// Lag truncation of the long-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// Newey-West plug-in rule for the Bartlett kernel.
    #[default]
    Auto,
    /// `floor(4 (T/100)^(1/4))`.
    Schwert,
    Fixed(usize),
}

impl KpssVariant {
    /// Critical values at 10%, 5%, 2.5% and 1%.
    pub fn critical_values(self) -> [f64; 4] {
        match self {
            KpssVariant::Level => [0.347, 0.463, 0.574, 0.739],
            KpssVariant::Trend => [0.119, 0.146, 0.176, 0.216],
        }
    }
}

const TABLE_LEVELS: [f64; 4] = [0.10, 0.05, 0.025, 0.01];

/// Intermediate quantities of one test, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct KpssWork {
    pub residuals: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub bandwidth: usize,
    pub long_run_variance: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpssResult {
    pub lm_statistic: f64,
    pub bandwidth: usize,
    pub p_value: f64,
    /// The statistic fell outside the tabulated range and `p_value` sits on
    /// the table edge.
    pub p_clamped: bool,
    pub stationary_at_5pct: bool,
    /// Zero-variance residuals; treated as stationary with a zero statistic.
    pub degenerate: bool,
}

fn residuals(series: &[f64], variant: KpssVariant) -> Vec<f64> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    match variant {
        KpssVariant::Level => series.iter().map(|y| y - mean).collect(),
        KpssVariant::Trend => {
            // t = 1..T regressor, centered
            let t_mean = (n + 1.0) / 2.0;
            let (mut stt, mut sty) = (0.0, 0.0);
            for (i, y) in series.iter().enumerate() {
                let dt = i as f64 + 1.0 - t_mean;
                stt += dt * dt;
                sty += dt * (y - mean);
            }
            let slope = sty / stt;
            series
                .iter()
                .enumerate()
                .map(|(i, y)| y - mean - slope * (i as f64 + 1.0 - t_mean))
                .collect()
        }
    }
}

/// `(1/T) sum_{t>j} e_t e_{t-j}`.
fn autocovariance(e: &[f64], lag: usize) -> f64 {
    e[lag..].iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / e.len() as f64
}

/// Newey-West automatic bandwidth for the Bartlett kernel.
pub fn newey_west_bandwidth(residuals: &[f64]) -> usize {
    let t = residuals.len();
    let tf = t as f64;
    let n_pre = ((4.0 * (tf / 100.0).powf(2.0 / 9.0)).floor() as usize).min(t - 1);
    let mut s0 = autocovariance(residuals, 0);
    let mut s1 = 0.0;
    for j in 1..=n_pre {
        let sj = autocovariance(residuals, j);
        s0 += 2.0 * sj;
        s1 += j as f64 * sj;
    }
    if !(s0 > 0.0) {
        return 0;
    }
    let a_hat = (s1 / s0).powi(2);
    let l = (1.1447 * (a_hat * tf).powf(1.0 / 3.0)).floor();
    (l.max(0.0) as usize).min(t - 1)
}

pub fn schwert_bandwidth(t: usize) -> usize {
    ((4.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize).min(t.saturating_sub(1))
}

/// Bartlett weight `1 - s/(l+1)`.
pub fn bartlett_weight(s: usize, l: usize) -> f64 {
    1.0 - s as f64 / (l as f64 + 1.0)
}

/// Bartlett-weighted long-run variance at lag truncation `l`.
pub fn long_run_variance(residuals: &[f64], l: usize) -> f64 {
    let mut s2 = autocovariance(residuals, 0);
    for s in 1..=l.min(residuals.len() - 1) {
        s2 += 2.0 * bartlett_weight(s, l) * autocovariance(residuals, s);
    }
    s2
}

pub fn kpss_work(series: &[f64], variant: KpssVariant, bandwidth: Bandwidth) -> Result<KpssWork> {
    if series.len() < MIN_LENGTH {
        return Err(Error::InsufficientData(format!(
            "KPSS needs at least {MIN_LENGTH} observations, got {}",
            series.len()
        )));
    }
    if series.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain("series contains non-finite values".into()));
    }
    let e = residuals(series, variant);
    let l = match bandwidth {
        Bandwidth::Auto => newey_west_bandwidth(&e),
        Bandwidth::Schwert => schwert_bandwidth(e.len()),
        Bandwidth::Fixed(l) => l.min(e.len() - 1),
    };
    let mut acc = 0.0;
    let partial_sums = e
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    Ok(KpssWork {
        long_run_variance: long_run_variance(&e, l),
        weights: (1..=l).map(|s| bartlett_weight(s, l)).collect(),
        residuals: e,
        partial_sums,
        bandwidth: l,
    })
}

/// Interpolates the p-value from the critical-value table, clamped to
/// `[0.01, 0.10]`.
pub fn kpss_p_value(lm: f64, variant: KpssVariant) -> (f64, bool) {
    let crit = variant.critical_values();
    if lm <= crit[0] {
        return (TABLE_LEVELS[0], lm < crit[0]);
    }
    if lm >= crit[3] {
        return (TABLE_LEVELS[3], lm > crit[3]);
    }
    let i = crit.windows(2).position(|w| lm < w[1]).unwrap();
    let frac = (lm - crit[i]) / (crit[i + 1] - crit[i]);
    (TABLE_LEVELS[i] + frac * (TABLE_LEVELS[i + 1] - TABLE_LEVELS[i]), false)
}

pub fn kpss_test(series: &[f64], variant: KpssVariant, bandwidth: Bandwidth) -> Result<KpssResult> {
    let work = kpss_work(series, variant, bandwidth)?;
    let t = series.len() as f64;
    let scale = series.iter().map(|y| y * y).sum::<f64>() / t;
    let gamma0 = autocovariance(&work.residuals, 0);
    if gamma0 <= 1e-24 * scale.max(f64::MIN_POSITIVE) || !(work.long_run_variance > 0.0) {
        return Ok(KpssResult {
            lm_statistic: 0.0,
            bandwidth: work.bandwidth,
            p_value: TABLE_LEVELS[0],
            p_clamped: true,
            stationary_at_5pct: true,
            degenerate: true,
        });
    }
    let lm = work.partial_sums.iter().map(|s| s * s).sum::<f64>() / (t * t) / work.long_run_variance;
    let (p_value, p_clamped) = kpss_p_value(lm, variant);
    Ok(KpssResult {
        lm_statistic: lm,
        bandwidth: work.bandwidth,
        p_value,
        p_clamped,
        stationary_at_5pct: p_value > 0.05,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpssConfig {
    pub variant: KpssVariant,
    pub bandwidth: Bandwidth,
    pub activity_floor: usize,
}

impl Default for KpssConfig {
    fn default() -> Self {
        KpssConfig {
            variant: KpssVariant::Level,
            bandwidth: Bandwidth::Auto,
            activity_floor: DEFAULT_ACTIVITY_FLOOR,
        }
    }
}

/// Share of accounts in one slice whose series passes the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarySummary {
    pub tested: usize,
    pub stationary: usize,
    pub degenerate: usize,
    pub below_floor: usize,
    pub activity_floor: usize,
    /// `100 * stationary / tested`; `None` when nothing was tested.
    pub percentage: Option<f64>,
}

/// Runs the test on every series with at least `activity_floor` non-zero
/// bins. Degenerate series count as stationary.
pub fn stationary_fraction(series_set: &[HourlySeries], cfg: &KpssConfig) -> Result<StationarySummary> {
    let eligible: Vec<&HourlySeries> = series_set
        .iter()
        .filter(|s| s.active_bins() >= cfg.activity_floor)
        .collect();
    let results = eligible
        .par_iter()
        .map(|s| kpss_test(&s.as_f64(), cfg.variant, cfg.bandwidth))
        .collect::<Result<Vec<_>>>()?;
    let tested = results.len();
    let stationary = results.iter().filter(|r| r.stationary_at_5pct).count();
    Ok(StationarySummary {
        tested,
        stationary,
        degenerate: results.iter().filter(|r| r.degenerate).count(),
        below_floor: series_set.len() - tested,
        activity_floor: cfg.activity_floor,
        percentage: (tested > 0).then(|| 100.0 * stationary as f64 / tested as f64),
    })
}
