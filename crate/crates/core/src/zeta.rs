//! Hurwitz zeta function `zeta(s, q) = sum_{k>=0} (q + k)^-s` and its first
//! two derivatives in `s`, by direct summation plus an Euler-Maclaurin tail.

use crate::error::{Error, Result};

/// Smallest exponent accepted; below this the series is numerically divergent.
pub const MIN_EXPONENT: f64 = 1.0 + 1e-6;

// B_{2j} / (2j)! for j = 1..=12
const BERNOULLI_OVER_FACTORIAL: [f64; 12] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
    -691.0 / 2730.0 / 479001600.0,
    7.0 / 6.0 / 87178291200.0,
    -3617.0 / 510.0 / 20922789888000.0,
    43867.0 / 798.0 / 6402373705728000.0,
    -174611.0 / 330.0 / 2432902008176640000.0,
    854513.0 / 138.0 / 1.1240007277776077e21,
    -236364091.0 / 2730.0 / 6.204484017332394e23,
];

/// `zeta(s, q)` together with `d/ds` and `d^2/ds^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaDerivatives {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

fn check_args(s: f64, q: f64) -> Result<()> {
    if !(s >= MIN_EXPONENT) {
        return Err(Error::Domain(format!(
            "Hurwitz zeta diverges for s = {s} (need s >= 1 + 1e-6)"
        )));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("Hurwitz zeta needs q > 0, got {q}")));
    }
    Ok(())
}

/// Number of directly summed terms so that the Euler-Maclaurin expansion
/// starts far enough out for 12 correction terms to reach ~1e-15.
fn direct_terms(s: f64, q: f64) -> usize {
    let start = 12.0 + s;
    if q >= start {
        0
    } else {
        (start - q).ceil() as usize
    }
}

pub fn hurwitz_zeta(s: f64, q: f64) -> Result<f64> {
    check_args(s, q)?;
    let n = direct_terms(s, q);
    let mut sum = 0.0;
    for k in (0..n).rev() {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + n as f64;
    let a_s = a.powf(-s);
    let mut tail = a * a_s / (s - 1.0) + 0.5 * a_s;
    // term_j = B_2j/(2j)! * s(s+1)...(s+2j-2) * a^(-s-2j+1)
    let mut rising = s;
    let mut power = a_s / a;
    let inv_a2 = 1.0 / (a * a);
    for (j, &c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = c * rising * power;
        tail += term;
        if term.abs() < 1e-17 * tail.abs() {
            break;
        }
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power *= inv_a2;
    }
    Ok(sum + tail)
}

/// `zeta(s, q)`, `d zeta/ds` and `d^2 zeta/ds^2`, each with the same series.
pub fn hurwitz_zeta_derivatives(s: f64, q: f64) -> Result<ZetaDerivatives> {
    check_args(s, q)?;
    let n = direct_terms(s, q);
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for k in (0..n).rev() {
        let x = q + k as f64;
        let l = x.ln();
        let t = x.powf(-s);
        v += t;
        d1 -= l * t;
        d2 += l * l * t;
    }
    let a = q + n as f64;
    let l = a.ln();
    let a_s = a.powf(-s);
    let g = 1.0 / (s - 1.0);
    // integral term a^(1-s)/(s-1) and its s-derivatives
    let integral = a * a_s;
    v += integral * g;
    d1 += integral * (-l * g - g * g);
    d2 += integral * (l * l * g + 2.0 * l * g * g + 2.0 * g * g * g);
    // half term a^-s / 2
    v += 0.5 * a_s;
    d1 -= 0.5 * l * a_s;
    d2 += 0.5 * l * l * a_s;
    // P(s) = prod_{i<2j-1}(s+i); h1 = sum 1/(s+i), h2 = sum 1/(s+i)^2
    let mut poly = s;
    let mut h1 = 1.0 / s;
    let mut h2 = 1.0 / (s * s);
    let mut power = a_s / a;
    let inv_a2 = 1.0 / (a * a);
    for (j, &c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let base = c * poly * power;
        let p1 = h1;
        let p2 = h1 * h1 - h2;
        v += base;
        d1 += base * (p1 - l);
        d2 += base * (p2 - 2.0 * l * p1 + l * l);
        if base.abs() * (1.0 + l * l) < 1e-18 * v.abs() {
            break;
        }
        let m = 2.0 * j as f64;
        for extra in [s + m + 1.0, s + m + 2.0] {
            poly *= extra;
            h1 += 1.0 / extra;
            h2 += 1.0 / (extra * extra);
        }
        power *= inv_a2;
    }
    Ok(ZetaDerivatives { value: v, d1, d2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // (s, q, zeta, d/ds, d2/ds2) from a 40-digit arbitrary-precision evaluation
    #[allow(clippy::excessive_precision)]
    const REFERENCE: [(f64, f64, f64, f64, f64); 11] = [
        (2.0, 1.0, 1.6449340668482264365, -0.9375482543158437537, 1.9892802342989010234),
        (2.5, 10.0, 0.022728699194534540521, -0.066363134232532080888, 0.20384761256407607964),
        (1.000001, 1.0, 1000000.5772980043553, -1000000000164.4604601, 2000000000493599827.7),
        (1.5, 1.0, 2.6123753486854883433, -3.9322397374311015107, 15.98955637122568675),
        (3.7, 2.0, 0.10628824146467924429, -0.09220632335339039039, 0.092177381906827393328),
        (20.0, 1.0, 1.0000009539620338728, -6.613530207367107733e-7, 4.5854362516394898709e-7),
        (2.32, 5.0, 0.10339388871214749874, -0.23459813838659913679, 0.59122963427290981625),
        (1.68, 24.0, 0.17184129058717705911, -0.79524138674806421244, 4.0517947222963683586),
        (1.94, 825.0, 0.0019304247519769826906, -0.015016015692855492729, 0.11898841310340323085),
        (6.0, 3.0, 0.0017180619844491397145, -0.0020217404355465796163, 0.0024326503916723246939),
        (1.1, 100.0, 6.3127340152372321677, -92.166943669191880063, 1976.9257210089288671),
    ];

    #[test]
    fn basel() {
        assert!(rel(hurwitz_zeta(2.0, 1.0).unwrap(), PI * PI / 6.0) < 1e-13);
        assert!(rel(hurwitz_zeta(2.0, 2.0).unwrap(), PI * PI / 6.0 - 1.0) < 1e-13);
    }

    #[test]
    fn matches_reference_values() {
        for (s, q, z, d1, d2) in REFERENCE {
            let got = hurwitz_zeta(s, q).unwrap();
            assert!(rel(got, z) < 1e-12, "zeta({s},{q}) = {got}, want {z}");
            let d = hurwitz_zeta_derivatives(s, q).unwrap();
            assert!(rel(d.value, z) < 1e-12, "value({s},{q})");
            assert!(rel(d.d1, d1) < 1e-10, "d1({s},{q}) = {}, want {d1}", d.d1);
            assert!(rel(d.d2, d2) < 1e-10, "d2({s},{q}) = {}, want {d2}", d.d2);
        }
    }

    #[test]
    fn brute_force_partial_sum() {
        // 10^7 terms plus the first-order remainder of the tail
        let (s, q) = (2.5f64, 10.0f64);
        let terms = 10_000_000u64;
        let mut sum = 0.0;
        for k in (0..terms).rev() {
            sum += (q + k as f64).powf(-s);
        }
        let a = q + terms as f64;
        sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
        assert!(rel(hurwitz_zeta(s, q).unwrap(), sum) < 1e-10);
    }

    #[test]
    fn shift_identity() {
        for &(s, q) in &[(1.3, 1.0), (2.0, 7.0), (4.5, 2.0), (1.01, 50.0), (11.0, 3.0)] {
            let lhs = hurwitz_zeta(s, q + 1.0).unwrap();
            let rhs = hurwitz_zeta(s, q).unwrap() - q.powf(-s);
            assert!(rel(lhs, rhs) < 1e-12, "s={s} q={q}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &(s, q) in &[(1.7, 3.0), (2.4, 12.0), (3.1, 1.0)] {
            let h = 1e-4;
            let f = |x: f64| hurwitz_zeta(x, q).unwrap();
            let d = hurwitz_zeta_derivatives(s, q).unwrap();
            let fd1 = (f(s + h) - f(s - h)) / (2.0 * h);
            let fd2 = (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
            assert!(rel(d.d1, fd1) < 1e-7);
            assert!(rel(d.d2, fd2) < 1e-5);
        }
    }

    #[test]
    fn rejects_divergent_arguments() {
        assert!(hurwitz_zeta(1.0, 1.0).is_err());
        assert!(hurwitz_zeta(0.5, 1.0).is_err());
        assert!(hurwitz_zeta(f64::NAN, 1.0).is_err());
        assert!(hurwitz_zeta(2.0, 0.0).is_err());
        assert!(hurwitz_zeta_derivatives(1.0, 3.0).is_err());
    }
}
