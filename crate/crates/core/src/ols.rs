//! Unweighted simple linear regression shared by the log-log fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
    /// Standard errors; absent when `n <= 2`.
    pub slope_se: Option<f64>,
    pub intercept_se: Option<f64>,
}

/// Ordinary least squares of `ys` on `xs` (centered sums).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "regression needs at least 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= f64::EPSILON * nf * mean_x.abs().max(1.0) {
        return Err(Error::InsufficientData(
            "regression needs at least 2 distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse = ys
        .iter()
        .zip(xs)
        .map(|(&y, &x)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        let se_b = (s2 / sxx).sqrt();
        (Some(se_b), Some((s2 * (1.0 / nf + mean_x * mean_x / sxx)).sqrt()))
    } else {
        (None, None)
    };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        n,
        slope_se,
        intercept_se,
    })
}
