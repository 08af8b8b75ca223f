//! Seeded generators that act as ground truth for every estimator.
//!
//! All randomness flows from a single pinned algorithm, ChaCha8 as shipped
//! by `rand_chacha`, so a `(parameters, seed)` pair always produces the same
//! output on every platform. Per-account streams derive their own sub-seed
//! from the parent seed and the account index, which keeps results
//! independent of how work is split across threads.

mod accounts;
mod ledger;

pub use accounts::{
    gen_common_mode_accounts, gen_poisson_accounts, gen_random_walk, integerize_walk,
};
pub use ledger::{
    account_address, fabricate_ledger, fabricate_records, PartnerLaw, ScenarioSpec, Sidecar,
    SidecarSlice, SliceSpec,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::powerlaw::TailModel;

/// Name recorded in sidecars and reports.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9";

pub type SynthRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser over `(seed, index)`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler for the discrete power law above `x_min`.
#[derive(Debug, Clone)]
pub struct PowerLawSampler {
    model: TailModel,
    /// `P(X > x_min + i)`, non-increasing.
    ccdf_table: Vec<f64>,
}

const TABLE_LEN: usize = 4096;

impl PowerLawSampler {
    pub fn new(gamma: f64, x_min: u64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Domain(format!("power-law exponent must exceed 1, got {gamma}")));
        }
        let model = TailModel::new(gamma, x_min)?;
        let ccdf_table = (0..TABLE_LEN as u64).map(|i| model.ccdf(x_min + i)).collect();
        Ok(PowerLawSampler { model, ccdf_table })
    }

    pub fn model(&self) -> &TailModel {
        &self.model
    }

    /// Smallest `x` with `P(X <= x) >= u`, for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> u64 {
        let v = 1.0 - u;
        let idx = self.ccdf_table.partition_point(|&c| c > v);
        if idx < self.ccdf_table.len() {
            return self.model.x_min + idx as u64;
        }
        // doubling then bisection on the zeta tail
        let mut lo = self.model.x_min + TABLE_LEN as u64 - 1; // ccdf(lo) > v
        let mut hi = lo.saturating_mul(2);
        const CAP: u64 = 1 << 62;
        while self.model.ccdf(hi) > v {
            if hi >= CAP {
                return CAP;
            }
            lo = hi;
            hi = hi.saturating_mul(2).min(CAP);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.model.ccdf(mid) > v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.quantile(rng.random::<f64>())
    }
}

pub fn sample_discrete_powerlaw(gamma: f64, x_min: u64, n: usize, seed: u64) -> Result<Vec<u64>> {
    let sampler = PowerLawSampler::new(gamma, x_min)?;
    let mut rng = rng(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// Draws from `p(x) = (1 - e^-lambda) e^(-lambda (x - x_min))`.
pub fn sample_discrete_exponential(lambda: f64, x_min: u64, n: usize, seed: u64) -> Result<Vec<u64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("exponential rate must be positive, got {lambda}")));
    }
    let mut rng = rng(seed);
    Ok((0..n)
        .map(|_| {
            let v = 1.0 - rng.random::<f64>();
            x_min + (-v.ln() / lambda).floor() as u64
        })
        .collect())
}
