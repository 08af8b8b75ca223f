//! Labelled transfer-ledger fabrication with an exact ground-truth sidecar.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng, sub_seed, PowerLawSampler, SynthRng, RNG_ALGORITHM};
use crate::activity::SenderProfile;
use crate::error::{Error, Result};
use crate::ingest::CategoryCounts;
use crate::model::{InteractionCategory, PeriodPartition, Role, TransferRecord};

/// Scenario file contents. Periods come either from explicit `boundaries`
/// or from `start_ts`, `periods` and `period_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub boundaries: Option<Vec<i64>>,
    #[serde(default)]
    pub start_ts: Option<i64>,
    #[serde(default)]
    pub periods: Option<usize>,
    #[serde(default)]
    pub period_seconds: Option<i64>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub slices: Vec<SliceSpec>,
}

fn default_delimiter() -> char {
    ','
}

/// How the senders of one category are populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SliceSpec {
    /// `rows[p]` transfers in period `p + 1`, sender and receiver drawn
    /// uniformly from pools of the given sizes.
    Quota {
        category: InteractionCategory,
        rows: Vec<u64>,
        senders: u64,
        receivers: u64,
    },
    /// Every sender draws a partner count `N` from `partners` and sends
    /// `trades_per_partner` transfers to each partner, so `V = m N`.
    /// Partners come from a shared pool when `receiver_pool` is set,
    /// otherwise each partner is a fresh account.
    Profiles {
        category: InteractionCategory,
        /// 1-based periods to populate; empty means all.
        #[serde(default)]
        periods: Vec<usize>,
        senders: u64,
        partners: PartnerLaw,
        #[serde(default = "one")]
        trades_per_partner: u64,
        #[serde(default)]
        receiver_pool: Option<u64>,
    },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartnerLaw {
    Fixed {
        value: u64,
    },
    PowerLaw {
        gamma: f64,
        x_min: u64,
        #[serde(default)]
        max: Option<u64>,
    },
    LogUniform {
        min: u64,
        max: u64,
    },
}

enum PartnerSampler {
    Fixed(u64),
    PowerLaw(PowerLawSampler, Option<u64>),
    LogUniform(u64, u64),
}

impl PartnerSampler {
    fn sample(&self, rng: &mut SynthRng) -> u64 {
        match self {
            PartnerSampler::Fixed(v) => *v,
            PartnerSampler::PowerLaw(s, cap) => {
                let x = s.sample(rng);
                cap.map_or(x, |c| x.min(c))
            }
            PartnerSampler::LogUniform(lo, hi) => {
                let (a, b) = ((*lo as f64).ln(), ((*hi + 1) as f64).ln());
                let x = rng.random_range(a..b).exp().floor() as u64;
                x.clamp(*lo, *hi)
            }
        }
    }
}

fn scenario_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario {
        field: field.into(),
        message: message.into(),
    }
}

impl SliceSpec {
    pub fn category(&self) -> InteractionCategory {
        match self {
            SliceSpec::Quota { category, .. } | SliceSpec::Profiles { category, .. } => *category,
        }
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn partition(&self) -> Result<PeriodPartition> {
        let bad = |m: String| scenario_err("periods", m);
        match (&self.boundaries, self.start_ts, self.periods, self.period_seconds) {
            (Some(b), None, None, None) => {
                PeriodPartition::from_boundaries(b.clone()).map_err(|e| bad(e.to_string()))
            }
            (None, Some(start), Some(k), Some(len)) => {
                if k == 0 || len < 1 || start < 0 {
                    return Err(bad("need start_ts >= 0, periods >= 1, period_seconds >= 1".into()));
                }
                let boundaries = (0..=k as i64).map(|i| start + i * len).collect();
                PeriodPartition::from_boundaries(boundaries).map_err(|e| bad(e.to_string()))
            }
            _ => Err(bad(
                "give either boundaries, or start_ts with periods and period_seconds".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<PeriodPartition> {
        let partition = self.partition()?;
        if partition.start_ts() < 0 {
            return Err(scenario_err("boundaries", "timestamps must be non-negative"));
        }
        let k = partition.k();
        if self.slices.is_empty() {
            return Err(scenario_err("slices", "at least one slice is required"));
        }
        if self.slices.len() > 255 {
            return Err(scenario_err("slices", "at most 255 slices"));
        }
        let mut expected_rows = 0u64;
        for (i, slice) in self.slices.iter().enumerate() {
            let field = |f: &str| format!("slices[{i}].{f}");
            match slice {
                SliceSpec::Quota {
                    rows,
                    senders,
                    receivers,
                    ..
                } => {
                    if rows.len() != k {
                        return Err(scenario_err(
                            field("rows"),
                            format!("expected {k} per-period quotas, got {}", rows.len()),
                        ));
                    }
                    let total: u64 = rows.iter().sum();
                    if total > 0 && (*senders == 0 || *receivers == 0) {
                        return Err(scenario_err(field("senders"), "account pools must be non-empty"));
                    }
                    expected_rows += total;
                }
                SliceSpec::Profiles {
                    periods,
                    senders,
                    partners,
                    trades_per_partner,
                    receiver_pool,
                    ..
                } => {
                    if let Some(p) = periods.iter().find(|&&p| p == 0 || p > k) {
                        return Err(scenario_err(field("periods"), format!("period {p} outside 1..={k}")));
                    }
                    if *trades_per_partner == 0 {
                        return Err(scenario_err(field("trades_per_partner"), "must be >= 1"));
                    }
                    if *receiver_pool == Some(0) {
                        return Err(scenario_err(field("receiver_pool"), "must be >= 1"));
                    }
                    match partners {
                        PartnerLaw::Fixed { value } if *value == 0 => {
                            return Err(scenario_err(field("partners.value"), "must be >= 1"));
                        }
                        PartnerLaw::PowerLaw { gamma, x_min, max } => {
                            if !(*gamma > 1.0) || !gamma.is_finite() {
                                return Err(scenario_err(field("partners.gamma"), format!("must exceed 1, got {gamma}")));
                            }
                            if *x_min == 0 || max.is_some_and(|m| m < *x_min) {
                                return Err(scenario_err(field("partners.x_min"), "need 1 <= x_min <= max"));
                            }
                        }
                        PartnerLaw::LogUniform { min, max } if *min == 0 || max < min => {
                            return Err(scenario_err(field("partners.min"), "need 1 <= min <= max"));
                        }
                        _ => {}
                    }
                    let n_periods = if periods.is_empty() { k } else { periods.len() };
                    expected_rows += senders * n_periods as u64;
                }
            }
        }
        if expected_rows == 0 {
            return Err(scenario_err("slices", "the scenario produces no rows"));
        }
        Ok(partition)
    }
}

/// Address of account `index` in `role` of slice `slice`; 42 characters,
/// unique per (category, slice, role, index).
pub fn account_address(category: InteractionCategory, slice: usize, role: Role, index: u64) -> String {
    let role_code = match role {
        Role::Sender => 1,
        Role::Receiver => 2,
    };
    format!("0x{:02x}{:02x}{:02x}{:034x}", category.index(), slice, role_code, index)
}

#[derive(Debug, Clone, Copy)]
struct Row {
    slice: u8,
    category: InteractionCategory,
    sender: u64,
    receiver: u64,
    ts: i64,
}

impl Row {
    fn sender_address(&self) -> String {
        account_address(self.category, self.slice as usize, Role::Sender, self.sender)
    }

    fn receiver_address(&self) -> String {
        account_address(self.category, self.slice as usize, Role::Receiver, self.receiver)
    }
}

/// Ground truth of one (category, period) slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarSlice {
    pub category: InteractionCategory,
    pub period: usize,
    pub rows: u64,
    /// Sorted by account id.
    pub sender_profiles: Vec<SenderProfile>,
    /// Transfers received per account, keyed by account id.
    pub receiver_totals: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub rng: String,
    pub seed: u64,
    pub rows: u64,
    pub boundaries: Vec<i64>,
    /// Fixed category order, per-period counts ascending.
    pub census: Vec<CategoryCounts>,
    pub slices: Vec<SidecarSlice>,
}

impl Sidecar {
    pub fn slice(&self, category: InteractionCategory, period: usize) -> Option<&SidecarSlice> {
        self.slices
            .iter()
            .find(|s| s.category == category && s.period == period)
    }
}

fn uniform_ts(rng: &mut SynthRng, window: (i64, i64)) -> i64 {
    rng.random_range(window.0..window.1)
}

fn generate_rows(spec: &ScenarioSpec, partition: &PeriodPartition, seed: u64) -> Vec<Row> {
    let mut rows = Vec::new();
    for (si, slice) in spec.slices.iter().enumerate() {
        let stream = |period: usize| rng(sub_seed(seed, ((si as u64) << 32) | period as u64));
        match slice {
            SliceSpec::Quota {
                category,
                rows: quotas,
                senders,
                receivers,
            } => {
                for (p, &quota) in quotas.iter().enumerate() {
                    let window = partition.window(p + 1);
                    let mut r = stream(p + 1);
                    rows.extend((0..quota).map(|_| Row {
                        slice: si as u8,
                        category: *category,
                        sender: r.random_range(0..*senders),
                        receiver: r.random_range(0..*receivers),
                        ts: uniform_ts(&mut r, window),
                    }));
                }
            }
            SliceSpec::Profiles {
                category,
                periods,
                senders,
                partners,
                trades_per_partner,
                receiver_pool,
            } => {
                let sampler = match partners {
                    PartnerLaw::Fixed { value } => PartnerSampler::Fixed(*value),
                    PartnerLaw::PowerLaw { gamma, x_min, max } => PartnerSampler::PowerLaw(
                        PowerLawSampler::new(*gamma, *x_min).expect("validated exponent"),
                        *max,
                    ),
                    PartnerLaw::LogUniform { min, max } => PartnerSampler::LogUniform(*min, *max),
                };
                let active: Vec<usize> = if periods.is_empty() {
                    (1..=partition.k()).collect()
                } else {
                    periods.clone()
                };
                let mut fresh = 0u64;
                for p in active {
                    let window = partition.window(p);
                    let mut r = stream(p);
                    for sender in 0..*senders {
                        let mut n = sampler.sample(&mut r);
                        let partners: Vec<u64> = match receiver_pool {
                            Some(pool) => {
                                n = n.min(*pool);
                                index::sample(&mut r, *pool as usize, n as usize)
                                    .into_iter()
                                    .map(|j| j as u64)
                                    .collect()
                            }
                            None => {
                                fresh += n;
                                (fresh - n..fresh).collect()
                            }
                        };
                        for receiver in partners {
                            for _ in 0..*trades_per_partner {
                                rows.push(Row {
                                    slice: si as u8,
                                    category: *category,
                                    sender,
                                    receiver,
                                    ts: uniform_ts(&mut r, window),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    rows.shuffle(&mut rng(sub_seed(seed, u64::MAX - 1)));
    rows
}

/// Account key -> (trades, distinct partners).
type SenderTruth = HashMap<(u8, u64), (u64, HashSet<(u8, u64)>)>;

#[derive(Default)]
struct SliceTruth {
    rows: u64,
    senders: SenderTruth,
    receivers: HashMap<(u8, u64), u64>,
}

fn build_sidecar(rows: &[Row], partition: &PeriodPartition, seed: u64) -> Sidecar {
    let k = partition.k();
    let mut truth: BTreeMap<(InteractionCategory, usize), SliceTruth> = BTreeMap::new();
    let mut counts = vec![vec![0u64; k]; 4];
    for row in rows {
        let period = partition.period_of(row.ts).expect("row inside its period");
        counts[row.category.index()][period - 1] += 1;
        let t = truth.entry((row.category, period)).or_default();
        t.rows += 1;
        let s = t.senders.entry((row.slice, row.sender)).or_default();
        s.0 += 1;
        s.1.insert((row.slice, row.receiver));
        *t.receivers.entry((row.slice, row.receiver)).or_default() += 1;
    }
    let census = InteractionCategory::ALL
        .into_iter()
        .map(|c| CategoryCounts {
            category: c,
            total: counts[c.index()].iter().sum(),
            per_period: counts[c.index()].clone(),
        })
        .collect();
    let slices = truth
        .into_iter()
        .map(|((category, period), t)| {
            let mut sender_profiles: Vec<SenderProfile> = t
                .senders
                .into_iter()
                .map(|((slice, idx), (v, partners))| SenderProfile {
                    account_id: account_address(category, slice as usize, Role::Sender, idx),
                    v,
                    n: partners.len() as u64,
                })
                .collect();
            sender_profiles.sort_by(|a, b| a.account_id.cmp(&b.account_id));
            let receiver_totals = t
                .receivers
                .into_iter()
                .map(|((slice, idx), c)| {
                    (account_address(category, slice as usize, Role::Receiver, idx), c)
                })
                .collect();
            SidecarSlice {
                category,
                period,
                rows: t.rows,
                sender_profiles,
                receiver_totals,
            }
        })
        .collect();
    Sidecar {
        rng: RNG_ALGORITHM.to_string(),
        seed,
        rows: rows.len() as u64,
        boundaries: partition.boundaries().to_vec(),
        census,
        slices,
    }
}

/// In-memory ledger in file order, with its sidecar.
pub fn fabricate_records(spec: &ScenarioSpec, seed: u64) -> Result<(Vec<TransferRecord>, Sidecar)> {
    let partition = spec.validate()?;
    let rows = generate_rows(spec, &partition, seed);
    let sidecar = build_sidecar(&rows, &partition, seed);
    let records = rows
        .iter()
        .map(|r| {
            let (s, c) = r.category.flags();
            TransferRecord {
                sender_id: r.sender_address(),
                receiver_id: r.receiver_address(),
                sender_is_contract: s,
                receiver_is_contract: c,
                timestamp: r.ts,
            }
        })
        .collect();
    Ok((records, sidecar))
}

/// Writes the ledger (`from,to,fromIsContract,toIsContract,timestamp`) and,
/// when a path is given, the JSON sidecar.
pub fn fabricate_ledger(
    spec: &ScenarioSpec,
    seed: u64,
    ledger_path: &Path,
    sidecar_path: Option<&Path>,
) -> Result<Sidecar> {
    let partition = spec.validate()?;
    let rows = generate_rows(spec, &partition, seed);
    let d = spec.delimiter;
    let write = || -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(ledger_path)?);
        writeln!(out, "from{d}to{d}fromIsContract{d}toIsContract{d}timestamp")?;
        for r in &rows {
            let (s, c) = r.category.flags();
            writeln!(
                out,
                "{}{d}{}{d}{}{d}{}{d}{}",
                r.sender_address(),
                r.receiver_address(),
                s as u8,
                c as u8,
                r.ts
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(ledger_path, e))?;
    let sidecar = build_sidecar(&rows, &partition, seed);
    if let Some(path) = sidecar_path {
        let mut text = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Invariant(format!("sidecar serialisation: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(sidecar)
}
