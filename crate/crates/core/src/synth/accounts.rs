//! Hourly activity processes with known variance structure.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;

use super::{rng, sub_seed};
use crate::activity::HourlySeries;
use crate::error::{Error, Result};
use crate::model::Role;

fn account_id(i: usize) -> String {
    format!("acct{i:06}")
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("account rates must be positive, got {r}")));
    }
    Ok(())
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    // rand_distr rejects a zero rate
    if lambda < 1e-300 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
}

/// Independent Poisson counts, `rates[i]` per hour over `t` hours.
pub fn gen_poisson_accounts(rates: &[f64], t: usize, seed: u64) -> Result<Vec<HourlySeries>> {
    gen_modulated(rates, &vec![1.0; t], seed)
}

/// Counts driven by one shared gamma factor `f_t` with mean 1 and variance
/// `c`: account `i` draws Poisson(`rates[i] * f_t`). `c = 0` is the plain
/// Poisson process with the same per-account streams.
pub fn gen_common_mode_accounts(
    rates: &[f64],
    c: f64,
    t: usize,
    seed: u64,
) -> Result<Vec<HourlySeries>> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("common-mode variance must be >= 0, got {c}")));
    }
    let factor = if c == 0.0 {
        vec![1.0; t]
    } else {
        let gamma = Gamma::new(1.0 / c, c).map_err(|e| Error::Domain(e.to_string()))?;
        let mut r = rng(sub_seed(seed, u64::MAX));
        (0..t).map(|_| gamma.sample(&mut r)).collect()
    };
    gen_modulated(rates, &factor, seed)
}

fn gen_modulated(rates: &[f64], factor: &[f64], seed: u64) -> Result<Vec<HourlySeries>> {
    check_rates(rates)?;
    if factor.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 hours, got {}", factor.len())));
    }
    Ok(rates
        .par_iter()
        .enumerate()
        .map(|(i, &rate)| {
            let mut r = rng(sub_seed(seed, i as u64));
            HourlySeries {
                account_id: account_id(i),
                role: Role::Sender,
                counts: factor.iter().map(|f| poisson_draw(rate * f, &mut r)).collect(),
            }
        })
        .collect())
}

/// Gaussian random walk started at zero.
pub fn gen_random_walk(t: usize, step_sd: f64, seed: u64) -> Result<Vec<f64>> {
    if t < 10 {
        return Err(Error::Domain(format!("random walk needs at least 10 steps, got {t}")));
    }
    if !(step_sd >= 0.0) || !step_sd.is_finite() {
        return Err(Error::Domain(format!("step deviation must be >= 0, got {step_sd}")));
    }
    let mut r = rng(seed);
    let mut level = 0.0;
    if step_sd == 0.0 {
        return Ok(vec![level; t]);
    }
    let normal = Normal::new(0.0, step_sd).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((0..t)
        .map(|_| {
            level += normal.sample(&mut r);
            level
        })
        .collect())
}

/// Rounds `offset + walk` to non-negative integer counts.
pub fn integerize_walk(walk: &[f64], offset: f64) -> Vec<u64> {
    walk.iter().map(|w| (offset + w).round().max(0.0) as u64).collect()
}
