//! Discrete power-law tail fitting.
//!
//! The tail model is `p(x) = x^-gamma / zeta(gamma, x_min)` over integers
//! `x >= x_min`. `gamma` is the maximum-likelihood estimate, `x_min` is the
//! candidate threshold that minimises the Kolmogorov-Smirnov distance, and
//! the fit is compared against a discrete exponential on the same tail with
//! a Vuong-normalised log-likelihood ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::activity::DegreeSample;
use crate::error::{Error, Result};
use crate::model::Role;
use crate::zeta::{hurwitz_zeta, hurwitz_zeta_derivatives, MIN_EXPONENT};

/// Upper end of the exponent search interval.
pub const MAX_EXPONENT: f64 = 20.0;
/// Golden-section stopping width in `gamma`.
pub const GAMMA_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_TAIL_MIN: usize = 50;
pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

/// Fitted discrete power law above `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub gamma: f64,
    pub x_min: u64,
    pub zeta_norm: f64,
}

impl TailModel {
    pub fn new(gamma: f64, x_min: u64) -> Result<Self> {
        if x_min == 0 {
            return Err(Error::Domain("x_min must be >= 1".into()));
        }
        let zeta_norm = hurwitz_zeta(gamma, x_min as f64)?;
        Ok(TailModel {
            gamma,
            x_min,
            zeta_norm,
        })
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        if x < self.x_min {
            return f64::NEG_INFINITY;
        }
        -self.gamma * (x as f64).ln() - self.zeta_norm.ln()
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// `P(X > x) = zeta(gamma, x + 1) / zeta(gamma, x_min)`.
    pub fn ccdf(&self, x: u64) -> f64 {
        if x < self.x_min {
            return 1.0;
        }
        hurwitz_zeta(self.gamma, x as f64 + 1.0).expect("gamma validated at construction")
            / self.zeta_norm
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: u64) -> f64 {
        1.0 - self.ccdf(x)
    }
}

/// Cumulative distribution at each of the ascending `points` (all `>= x_min`).
/// Steps between nearby points are accumulated term by term; long gaps are
/// re-anchored on the zeta tail.
fn model_cdf_at(model: &TailModel, points: &[u64]) -> Vec<f64> {
    const MAX_STEP: u64 = 8;
    let mut out = Vec::with_capacity(points.len());
    // running zeta(gamma, x + 1) for the last evaluated x
    let mut last_x: Option<u64> = None;
    let mut upper = model.zeta_norm;
    for &x in points {
        match last_x {
            Some(prev) if x - prev <= MAX_STEP => {
                for k in prev + 1..=x {
                    upper -= (k as f64).powf(-model.gamma);
                }
            }
            _ => {
                upper = hurwitz_zeta(model.gamma, x as f64 + 1.0).expect("validated gamma");
            }
        }
        last_x = Some(x);
        out.push((1.0 - upper.max(0.0) / model.zeta_norm).clamp(0.0, 1.0));
    }
    out
}

/// Per-tail sufficient statistics used by the likelihood.
fn mean_log(tail: &[u64]) -> f64 {
    tail.iter().map(|&x| (x as f64).ln()).sum::<f64>() / tail.len() as f64
}

fn check_tail(tail: &[u64], x_min: u64) -> Result<()> {
    if x_min == 0 {
        return Err(Error::Domain("x_min must be >= 1".into()));
    }
    if tail.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "tail needs at least 2 values, got {}",
            tail.len()
        )));
    }
    if let Some(&bad) = tail.iter().find(|&&x| x < x_min) {
        return Err(Error::Domain(format!("tail value {bad} is below x_min {x_min}")));
    }
    let first = tail[0];
    if tail.iter().all(|&x| x == first) {
        return Err(Error::DegenerateTail(format!(
            "all {} tail values equal {first}",
            tail.len()
        )));
    }
    Ok(())
}

/// Per-observation log-likelihood `-ln zeta(gamma, x_min) - gamma * mean ln x`.
pub fn mean_log_likelihood(gamma: f64, x_min: u64, mean_ln_x: f64) -> Result<f64> {
    Ok(-hurwitz_zeta(gamma, x_min as f64)?.ln() - gamma * mean_ln_x)
}

/// Golden-section maximisation of a unimodal function on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    // the interval ends are candidates when the optimum sits on a bound
    [lo, mid, hi]
        .into_iter()
        .map(|g| (g, f(g)))
        .fold((mid, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

fn mle_from_stats(n: usize, mean_ln_x: f64, x_min: u64) -> Result<(f64, f64)> {
    let q = x_min as f64;
    let objective = |g: f64| match hurwitz_zeta(g, q) {
        Ok(z) => -z.ln() - g * mean_ln_x,
        Err(_) => f64::NEG_INFINITY,
    };
    let gamma = golden_max(MIN_EXPONENT, MAX_EXPONENT, GAMMA_TOLERANCE, objective);
    let d = hurwitz_zeta_derivatives(gamma, q)?;
    let info = n as f64 * (d.d2 / d.value - (d.d1 / d.value).powi(2));
    let sigma = if info > 0.0 { info.powf(-0.5) } else { f64::INFINITY };
    Ok((gamma, sigma))
}

/// Maximum-likelihood exponent and its Fisher-information standard error.
pub fn fit_gamma_mle(tail: &[u64], x_min: u64) -> Result<(f64, f64)> {
    check_tail(tail, x_min)?;
    mle_from_stats(tail.len(), mean_log(tail), x_min)
}

/// Largest absolute gap between the empirical and model CDFs, evaluated at
/// the distinct tail values.
pub fn ks_distance(tail: &[u64], model: &TailModel) -> Result<f64> {
    if tail.is_empty() {
        return Err(Error::InsufficientData("empty tail".into()));
    }
    let mut sorted = tail.to_vec();
    sorted.sort_unstable();
    if sorted[0] < model.x_min {
        return Err(Error::Domain(format!(
            "tail value {} is below x_min {}",
            sorted[0], model.x_min
        )));
    }
    Ok(ks_sorted(&sorted, model))
}

fn ks_sorted(sorted: &[u64], model: &TailModel) -> f64 {
    let n = sorted.len() as f64;
    let mut uniques = Vec::new();
    let mut cum = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        if i + 1 == sorted.len() || sorted[i + 1] != x {
            uniques.push(x);
            cum.push((i + 1) as f64 / n);
        }
    }
    let model_cdf = model_cdf_at(model, &uniques);
    cum.iter()
        .zip(&model_cdf)
        .map(|(s, p)| (s - p).abs())
        .fold(0.0, f64::max)
}

/// Result of the threshold scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XminSelection {
    pub x_min: u64,
    pub gamma: f64,
    pub sigma_gamma: f64,
    pub ks_distance: f64,
    pub n_tail: usize,
    pub candidates: usize,
}

/// Scans every distinct sample value with at least `n_tail_min` values at or
/// above it, fits `gamma` for each and keeps the smallest KS distance (ties
/// go to the smaller threshold).
pub fn select_xmin(sample: &[u64], n_tail_min: usize) -> Result<XminSelection> {
    let n_tail_min = n_tail_min.max(2);
    let mut sorted: Vec<u64> = sample.iter().copied().filter(|&x| x >= 1).collect();
    sorted.sort_unstable();
    if sorted.len() < n_tail_min {
        return Err(Error::InsufficientData(format!(
            "sample of {} positive values is smaller than the tail floor {n_tail_min}",
            sorted.len()
        )));
    }
    // suffix sums of ln x, indexed by start position
    let mut suffix_ln = vec![0.0; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + (sorted[i] as f64).ln();
    }
    let starts: Vec<usize> = (0..sorted.len())
        .filter(|&i| (i == 0 || sorted[i - 1] != sorted[i]) && sorted.len() - i >= n_tail_min)
        .collect();
    let fits: Vec<Option<XminSelection>> = starts
        .par_iter()
        .map(|&start| {
            let tail = &sorted[start..];
            let x_min = tail[0];
            if tail[tail.len() - 1] == x_min {
                return None;
            }
            let n = tail.len();
            let (gamma, sigma) = mle_from_stats(n, suffix_ln[start] / n as f64, x_min).ok()?;
            let model = TailModel::new(gamma, x_min).ok()?;
            Some(XminSelection {
                x_min,
                gamma,
                sigma_gamma: sigma,
                ks_distance: ks_sorted(tail, &model),
                n_tail: n,
                candidates: 0,
            })
        })
        .collect();
    let candidates = fits.iter().flatten().count();
    fits.into_iter()
        .flatten()
        .min_by(|a, b| {
            a.ks_distance
                .total_cmp(&b.ks_distance)
                .then(a.x_min.cmp(&b.x_min))
        })
        .map(|best| XminSelection { candidates, ..best })
        .ok_or_else(|| {
            Error::InsufficientData(format!(
                "no threshold leaves a non-degenerate tail of at least {n_tail_min} values"
            ))
        })
}

/// Rate `lambda` of the discrete exponential
/// `p(x) = (1 - e^-lambda) e^(-lambda (x - x_min))`.
pub fn fit_discrete_exponential(tail: &[u64], x_min: u64) -> Result<f64> {
    if tail.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "tail needs at least 2 values, got {}",
            tail.len()
        )));
    }
    if let Some(&bad) = tail.iter().find(|&&x| x < x_min) {
        return Err(Error::Domain(format!("tail value {bad} is below x_min {x_min}")));
    }
    let excess = tail.iter().map(|&x| (x - x_min) as f64).sum::<f64>() / tail.len() as f64;
    if excess <= 0.0 {
        return Err(Error::DegenerateTail(
            "all tail mass sits at x_min; exponential rate unbounded".into(),
        ));
    }
    Ok((1.0 / excess).ln_1p())
}

pub fn exponential_ln_pmf(x: u64, x_min: u64, lambda: f64) -> f64 {
    (-(-lambda).exp_m1()).ln() - lambda * (x - x_min) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlrResult {
    /// Summed log-likelihood ratio, first model over second.
    pub r: f64,
    /// `r / (s sqrt(n))`.
    pub normalized: f64,
    pub p_value: f64,
    /// Pointwise ratios have no spread; `p_value` is 1.
    pub indistinguishable: bool,
}

/// Vuong comparison from per-observation log-likelihoods of two models.
pub fn llr_from_pointwise(first: &[f64], second: &[f64]) -> LlrResult {
    assert_eq!(first.len(), second.len());
    let diffs: Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
    let n = diffs.len();
    let r: f64 = diffs.iter().sum();
    if n < 2 {
        return LlrResult {
            r,
            normalized: 0.0,
            p_value: 1.0,
            indistinguishable: true,
        };
    }
    let mean = r / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if !(var > 0.0) {
        return LlrResult {
            r,
            normalized: 0.0,
            p_value: 1.0,
            indistinguishable: true,
        };
    }
    let z = r / (var.sqrt() * (n as f64).sqrt());
    LlrResult {
        r,
        normalized: z,
        p_value: erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
        indistinguishable: false,
    }
}

/// Power law versus discrete exponential on the same tail; positive `r`
/// favours the power law.
pub fn llr_test(tail: &[u64], power: &TailModel, lambda: f64) -> LlrResult {
    let pl: Vec<f64> = tail.iter().map(|&x| power.ln_pmf(x)).collect();
    let ex: Vec<f64> = tail
        .iter()
        .map(|&x| exponential_ln_pmf(x, power.x_min, lambda))
        .collect();
    llr_from_pointwise(&pl, &ex)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PowerLawFavored,
    ExponentialFavored,
    Inconclusive,
}

impl Verdict {
    pub fn decide(llr: &LlrResult, significance: f64) -> Verdict {
        if llr.p_value >= significance || llr.r == 0.0 {
            Verdict::Inconclusive
        } else if llr.r > 0.0 {
            Verdict::PowerLawFavored
        } else {
            Verdict::ExponentialFavored
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub n_tail_min: usize,
    pub significance: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig {
            n_tail_min: DEFAULT_TAIL_MIN,
            significance: DEFAULT_SIGNIFICANCE,
        }
    }
}

/// One row of the tail-fit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailFitReport {
    pub role: Role,
    pub gamma: f64,
    pub x_min: u64,
    pub sigma_gamma: f64,
    pub ks_distance: f64,
    /// Summed log-likelihood ratio against the exponential.
    pub llr: f64,
    /// Vuong-normalised ratio, the statistic behind `p_value`.
    pub llr_normalized: f64,
    pub p_value: f64,
    pub n_tail: usize,
    pub n_sample: usize,
    pub lambda: f64,
    pub verdict: Verdict,
    pub indistinguishable: bool,
}

pub fn analyze_tail(sample: &DegreeSample, cfg: &TailConfig) -> Result<TailFitReport> {
    if sample.values.is_empty() {
        return Err(Error::InsufficientData("empty degree sample".into()));
    }
    let sel = select_xmin(&sample.values, cfg.n_tail_min)?;
    let tail: Vec<u64> = sample
        .values
        .iter()
        .copied()
        .filter(|&x| x >= sel.x_min)
        .collect();
    let lambda = fit_discrete_exponential(&tail, sel.x_min)?;
    let model = TailModel::new(sel.gamma, sel.x_min)?;
    let llr = llr_test(&tail, &model, lambda);
    Ok(TailFitReport {
        role: sample.role,
        gamma: sel.gamma,
        x_min: sel.x_min,
        sigma_gamma: sel.sigma_gamma,
        ks_distance: sel.ks_distance,
        llr: llr.r,
        llr_normalized: llr.normalized,
        p_value: llr.p_value,
        n_tail: tail.len(),
        n_sample: sample.values.len(),
        lambda,
        verdict: Verdict::decide(&llr, cfg.significance),
        indistinguishable: llr.indistinguishable,
    })
}

/// Log-binned empirical probability mass of a positive integer sample:
/// `(geometric bin centre, count / (n * integers covered))` for occupied bins.
pub fn log_binned_density(values: &[u64], n_bins: usize) -> Vec<(f64, f64)> {
    let positive: Vec<u64> = values.iter().copied().filter(|&x| x >= 1).collect();
    if positive.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let min = *positive.iter().min().unwrap() as f64;
    let max = *positive.iter().max().unwrap() as f64 + 1.0;
    let ratio = (max / min).ln() / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| min * (ratio * i as f64).exp()).collect();
    let mut counts = vec![0u64; n_bins];
    for &x in &positive {
        let idx = (((x as f64 / min).ln() / ratio).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let n = positive.len() as f64;
    (0..n_bins)
        .filter(|&i| counts[i] > 0)
        .map(|i| {
            // integers in [edges[i], edges[i+1])
            let lo = edges[i].ceil();
            let hi = edges[i + 1].ceil();
            let width = (hi - lo).max(1.0);
            ((edges[i] * edges[i + 1]).sqrt(), counts[i] as f64 / (n * width))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_normalises() {
        for &(g, xm) in &[(2.5, 1u64), (1.7, 24), (3.0, 5)] {
            let m = TailModel::new(g, xm).unwrap();
            let upper = 10_000_000u64;
            let mut total = 0.0;
            for x in (xm..=upper).rev() {
                total += (x as f64).powf(-g);
            }
            total /= m.zeta_norm;
            // integral bound on the remaining tail
            let bound = (upper as f64).powf(1.0 - g) / (g - 1.0) / m.zeta_norm;
            assert!(total + bound >= 1.0 - 1e-8, "{g} {xm}: {}", total + bound);
            assert!(total <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn cdf_helpers_agree() {
        let m = TailModel::new(2.2, 3).unwrap();
        let pts = [3u64, 4, 5, 9, 200, 201, 100_000];
        let fast = model_cdf_at(&m, &pts);
        for (x, f) in pts.iter().zip(fast) {
            assert!((m.cdf(*x) - f).abs() < 1e-12);
        }
        assert!((m.cdf(3) - m.pmf(3)).abs() < 1e-14);
        assert_eq!(m.ccdf(2), 1.0);
    }

    #[test]
    fn degenerate_tails() {
        assert!(matches!(fit_gamma_mle(&[5, 5, 5, 5], 5), Err(Error::DegenerateTail(_))));
        assert!(matches!(fit_gamma_mle(&[5], 5), Err(Error::InsufficientData(_))));
        assert!(fit_gamma_mle(&[4, 6], 5).is_err());
        assert!(matches!(
            fit_discrete_exponential(&[3, 3, 3], 3),
            Err(Error::DegenerateTail(_))
        ));
    }

    #[test]
    fn exponential_closed_form() {
        // mean excess of one: lambda = ln 2
        let l = fit_discrete_exponential(&[5, 6, 7, 4, 4, 4], 4).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let ln_sum: f64 = (0..2000).map(|x| exponential_ln_pmf(x + 2, 2, 0.3).exp()).sum();
        assert!((ln_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mle_matches_grid_on_fixed_tail() {
        let tail: Vec<u64> = (1..=400u64).map(|i| 1 + (i * i) % 97).collect();
        let (g, s) = fit_gamma_mle(&tail, 1).unwrap();
        let ml = mean_log(&tail);
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut x = 1.01;
        while x <= 6.0 {
            let v = mean_log_likelihood(x, 1, ml).unwrap();
            if v > best.1 {
                best = (x, v);
            }
            x += 1e-4;
        }
        assert!((g - best.0).abs() < 2e-4, "{g} vs {}", best.0);
        assert!(s > 0.0 && s.is_finite());
    }

    #[test]
    fn ks_distance_zero_on_exact_agreement() {
        let m = TailModel::new(2.0, 1).unwrap();
        assert!(ks_distance(&[], &m).is_err());
        assert!(ks_distance(&[0, 1], &m).is_err());
        // a single value at x_min: S = 1, P = p(1) = 6/pi^2
        let d = ks_distance(&[1], &m).unwrap();
        assert!((d - (1.0 - 6.0 / std::f64::consts::PI.powi(2))).abs() < 1e-12);
    }

    #[test]
    fn llr_small_and_flat() {
        let one = llr_from_pointwise(&[0.3], &[0.1]);
        assert!(one.indistinguishable && one.p_value == 1.0);
        let flat = llr_from_pointwise(&[1.0, 2.0], &[0.0, 1.0]);
        assert!(flat.indistinguishable && flat.p_value == 1.0 && flat.r == 2.0);
    }

    #[test]
    fn llr_antisymmetry() {
        let a = [-1.0, -2.5, -0.3, -4.0, -1.1];
        let b = [-1.2, -2.0, -0.9, -3.0, -1.0];
        let ab = llr_from_pointwise(&a, &b);
        let ba = llr_from_pointwise(&b, &a);
        assert_eq!(ab.r, -ba.r);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn verdict_rules() {
        let mk = |r, p| LlrResult { r, normalized: 0.0, p_value: p, indistinguishable: false };
        assert_eq!(Verdict::decide(&mk(3.0, 0.01), 0.05), Verdict::PowerLawFavored);
        assert_eq!(Verdict::decide(&mk(-3.0, 0.01), 0.05), Verdict::ExponentialFavored);
        assert_eq!(Verdict::decide(&mk(3.0, 0.05), 0.05), Verdict::Inconclusive);
    }

    #[test]
    fn select_xmin_errors() {
        assert!(select_xmin(&[1, 2, 3], 50).is_err());
        assert!(select_xmin(&vec![7; 100], 50).is_err());
        let empty = DegreeSample { role: Role::Sender, values: vec![] };
        assert!(analyze_tail(&empty, &TailConfig::default()).is_err());
    }

    #[test]
    fn density_bins_are_positive() {
        let values: Vec<u64> = (1..=1000u64).map(|i| 1 + i % 37 + i / 100).collect();
        let dens = log_binned_density(&values, 10);
        assert!(!dens.is_empty());
        assert!(dens.iter().all(|&(x, p)| x > 0.0 && p > 0.0));
    }
}
