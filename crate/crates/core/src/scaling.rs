//! Trade-volume versus partner-diversity scaling: geometric log-binning of
//! the (N, V) scatter and a log-log least-squares fit of `V ~ N^alpha`.

use serde::{Deserialize, Serialize};

use crate::activity::SenderProfile;
use crate::error::{Error, Result};
use crate::ols::fit_line;

pub const DEFAULT_BINS: usize = 20;

/// Where a bin sits on the N axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Abscissa {
    /// Arithmetic mean of the N values that fell in the bin.
    #[default]
    MeanN,
    /// Geometric mean of the bin's two edges.
    EdgeCenter,
}

/// One scatter point: partner count `n` and trade volume `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub n: f64,
    pub v: f64,
}

impl From<&SenderProfile> for ScatterPoint {
    fn from(p: &SenderProfile) -> Self {
        ScatterPoint {
            n: p.n as f64,
            v: p.v as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub abscissa: f64,
    pub mean_v: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogBinnedCurve {
    /// Occupied bins only, abscissae strictly increasing.
    pub bins: Vec<Bin>,
    pub n_bins_requested: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    /// `C` in `log10 V = alpha log10 N + C`.
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
    pub alpha_se: Option<f64>,
}

/// Bins points into `n_bins` geometric intervals over `[min N, max N]`.
/// Intervals are right-open except the last; empty bins are dropped.
pub fn log_bin_points(points: &[ScatterPoint], n_bins: usize, abscissa: Abscissa) -> Result<LogBinnedCurve> {
    if points.is_empty() {
        return Err(Error::InsufficientData("no profiles to bin".into()));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be >= 1".into()));
    }
    if points.iter().any(|p| !(p.n > 0.0) || !p.v.is_finite()) {
        return Err(Error::Domain("partner counts must be positive".into()));
    }
    let min = points.iter().map(|p| p.n).fold(f64::INFINITY, f64::min);
    let max = points.iter().map(|p| p.n).fold(f64::NEG_INFINITY, f64::max);

    if min == max {
        let mean_v = points.iter().map(|p| p.v).sum::<f64>() / points.len() as f64;
        return Ok(LogBinnedCurve {
            bins: vec![Bin {
                abscissa: min,
                mean_v,
                count: points.len(),
            }],
            n_bins_requested: n_bins,
        });
    }

    let log_min = min.ln();
    let log_span = max.ln() - log_min;
    let edge = |i: usize| (log_min + log_span * i as f64 / n_bins as f64).exp();
    let mut sum_n = vec![0.0; n_bins];
    let mut sum_v = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for p in points {
        let pos = (p.n.ln() - log_min) / log_span * n_bins as f64;
        let mut idx = (pos.floor().max(0.0) as usize).min(n_bins - 1);
        // guard rounding right at an interior edge
        if idx + 1 < n_bins && p.n >= edge(idx + 1) {
            idx += 1;
        } else if idx > 0 && p.n < edge(idx) {
            idx -= 1;
        }
        sum_n[idx] += p.n;
        sum_v[idx] += p.v;
        count[idx] += 1;
    }
    let bins = (0..n_bins)
        .filter(|&i| count[i] > 0)
        .map(|i| Bin {
            abscissa: match abscissa {
                Abscissa::MeanN => sum_n[i] / count[i] as f64,
                Abscissa::EdgeCenter => (edge(i) * edge(i + 1)).sqrt(),
            },
            mean_v: sum_v[i] / count[i] as f64,
            count: count[i],
        })
        .collect();
    Ok(LogBinnedCurve {
        bins,
        n_bins_requested: n_bins,
    })
}

pub fn log_bin(profiles: &[SenderProfile], n_bins: usize, abscissa: Abscissa) -> Result<LogBinnedCurve> {
    let points: Vec<ScatterPoint> = profiles.iter().map(ScatterPoint::from).collect();
    log_bin_points(&points, n_bins, abscissa)
}

/// OLS of `log10(mean_v)` on `log10(abscissa)` over the occupied bins.
pub fn fit_alpha(curve: &LogBinnedCurve) -> Result<ScalingFit> {
    let usable: Vec<&Bin> = curve.bins.iter().filter(|b| b.mean_v > 0.0).collect();
    let xs: Vec<f64> = usable.iter().map(|b| b.abscissa.log10()).collect();
    let ys: Vec<f64> = usable.iter().map(|b| b.mean_v.log10()).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(ScalingFit {
        alpha: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        n_points: line.n,
        alpha_se: line.slope_se,
    })
}

/// The same regression on the raw, unbinned scatter.
pub fn fit_alpha_raw(points: &[ScatterPoint]) -> Result<ScalingFit> {
    let usable: Vec<&ScatterPoint> = points.iter().filter(|p| p.n > 0.0 && p.v > 0.0).collect();
    let xs: Vec<f64> = usable.iter().map(|p| p.n.log10()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.v.log10()).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(ScalingFit {
        alpha: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        n_points: line.n,
        alpha_se: line.slope_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(pairs: &[(f64, f64)]) -> Vec<ScatterPoint> {
        pairs.iter().map(|&(n, v)| ScatterPoint { n, v }).collect()
    }

    #[test]
    fn degenerate_span_is_one_bin() {
        let c = log_bin_points(&pts(&[(5., 5.), (5., 9.), (5., 7.)]), 20, Abscissa::MeanN).unwrap();
        assert_eq!(c.bins, vec![Bin { abscissa: 5.0, mean_v: 7.0, count: 3 }]);
        assert!(matches!(fit_alpha(&c), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn two_point_two_bins() {
        let c = log_bin_points(&pts(&[(1., 1.), (100., 100.)]), 2, Abscissa::MeanN).unwrap();
        let means: Vec<f64> = c.bins.iter().map(|b| b.mean_v).collect();
        assert_eq!(means, vec![1.0, 100.0]);
        let f = fit_alpha(&c).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-12);

        let c = log_bin_points(&pts(&[(1., 1.), (100., 100.)]), 2, Abscissa::EdgeCenter).unwrap();
        assert!((c.bins[0].abscissa - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn last_bin_is_closed_and_every_point_lands_once() {
        let points: Vec<_> = (1..=1000).map(|n| ScatterPoint { n: n as f64, v: 1.0 }).collect();
        let c = log_bin_points(&points, 7, Abscissa::MeanN).unwrap();
        assert_eq!(c.bins.iter().map(|b| b.count).sum::<usize>(), 1000);
        assert!(c.bins.windows(2).all(|w| w[0].abscissa < w[1].abscissa));
    }

    #[test]
    fn errors() {
        assert!(log_bin_points(&[], 20, Abscissa::MeanN).is_err());
        assert!(log_bin_points(&pts(&[(1., 1.)]), 0, Abscissa::MeanN).is_err());
    }

    #[test]
    fn identity_and_square_curves() {
        for (alpha0, f) in [(1.0, (|n: f64| n) as fn(f64) -> f64), (2.0, |n: f64| n * n)] {
            let points: Vec<_> = (0..14).map(|k| {
                let n = 2f64.powi(k);
                ScatterPoint { n, v: f(n) }
            }).collect();
            let fit = fit_alpha(&log_bin_points(&points, 20, Abscissa::MeanN).unwrap()).unwrap();
            assert!((fit.alpha - alpha0).abs() < 1e-12, "{alpha0}: {}", fit.alpha);
            assert!((fit.r2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_profiles_recover_unit_slope_with_mean_abscissa() {
        // V = 7 N over every N in 1..=500: exact with the in-bin mean abscissa
        let profiles: Vec<_> = (1..=500u64)
            .map(|n| SenderProfile { account_id: n.to_string(), v: 7 * n, n })
            .collect();
        let fit = fit_alpha(&log_bin(&profiles, 20, Abscissa::MeanN).unwrap()).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.log10()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_equivariance(
            ns in proptest::collection::vec(1u32..10_000, 3..200),
            alpha in 0.3f64..2.5,
            c in 0.01f64..1000.0,
            n_bins in 2usize..40,
        ) {
            let base: Vec<_> = ns.iter().enumerate()
                .map(|(i, &n)| ScatterPoint { n: n as f64, v: (n as f64).powf(alpha) * (1.0 + (i % 7) as f64 * 0.1) })
                .collect();
            let scaled: Vec<_> = base.iter().map(|p| ScatterPoint { n: p.n, v: p.v * c }).collect();
            let a = log_bin_points(&base, n_bins, Abscissa::MeanN).unwrap();
            let b = log_bin_points(&scaled, n_bins, Abscissa::MeanN).unwrap();
            if let (Ok(fa), Ok(fb)) = (fit_alpha(&a), fit_alpha(&b)) {
                prop_assert!((fa.alpha - fb.alpha).abs() < 1e-9);
                prop_assert!((fb.intercept - fa.intercept - c.log10()).abs() < 1e-9);
            }
        }

        #[test]
        fn exact_power_law_recovered_for_any_bin_count(alpha0 in 0.2f64..3.0, n_bins in 2usize..60) {
            // one distinct N per occupied bin: N spaced wider than any bin
            let points: Vec<_> = (0..n_bins as i32).map(|k| {
                let n = 10f64.powf(k as f64 * 4.0 / (n_bins as f64 - 1.0));
                ScatterPoint { n, v: n.powf(alpha0) }
            }).collect();
            let curve = log_bin_points(&points, n_bins, Abscissa::MeanN).unwrap();
            let fit = fit_alpha(&curve).unwrap();
            prop_assert!((fit.alpha - alpha0).abs() < 1e-9, "{} vs {}", fit.alpha, alpha0);
        }

        #[test]
        fn binning_idempotent_on_single_point_bins(alpha0 in 0.2f64..3.0, noise in proptest::collection::vec(0.5f64..2.0, 12)) {
            let points: Vec<_> = noise.iter().enumerate().map(|(k, &z)| {
                let n = 3f64.powi(k as i32);
                ScatterPoint { n, v: n.powf(alpha0) * z }
            }).collect();
            let binned = fit_alpha(&log_bin_points(&points, 12, Abscissa::MeanN).unwrap()).unwrap();
            let raw = fit_alpha_raw(&points).unwrap();
            prop_assert!((binned.alpha - raw.alpha).abs() < 1e-12);
            prop_assert!((binned.intercept - raw.intercept).abs() < 1e-12);
        }
    }
}
