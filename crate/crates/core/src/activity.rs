//! Per-account aggregates of one (category, period) slice: sender
//! volume/partner profiles, per-role trade counts and hourly activity.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Role, TransferRecord};

pub const SECONDS_PER_HOUR: i64 = 3600;

/// Trade volume `v` (transfers sent) and partner diversity `n` (distinct
/// receivers) of one sender.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderProfile {
    pub account_id: String,
    pub v: u64,
    pub n: u64,
}

/// Per-account trade counts for one role; one value per account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSample {
    pub role: Role,
    pub values: Vec<u64>,
}

/// Hourly trade counts of one account, bins anchored at the period start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourlySeries {
    pub account_id: String,
    pub role: Role,
    pub counts: Vec<u64>,
}

impl HourlySeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn active_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Number of hour bins covering `[start, end)`.
pub fn hours_in_window(start: i64, end: i64) -> usize {
    assert!(end > start, "empty window");
    ((end - start + SECONDS_PER_HOUR - 1) / SECONDS_PER_HOUR) as usize
}

#[derive(Debug, Clone, Default)]
struct SenderAcc {
    partners: HashMap<String, u64>,
    hours: HashMap<u32, u64>,
}

#[derive(Debug, Clone, Default)]
struct ReceiverAcc {
    hours: HashMap<u32, u64>,
}

/// Streaming aggregate of one slice. `merge` is associative and commutative,
/// so disjoint chunks may be folded independently.
#[derive(Debug, Clone)]
pub struct SliceAggregate {
    window: (i64, i64),
    rows: u64,
    senders: HashMap<String, SenderAcc>,
    receivers: HashMap<String, ReceiverAcc>,
}

impl SliceAggregate {
    /// `window` is the period's `[start, end)`.
    pub fn new(window: (i64, i64)) -> Self {
        assert!(window.1 > window.0, "empty window");
        SliceAggregate {
            window,
            rows: 0,
            senders: HashMap::new(),
            receivers: HashMap::new(),
        }
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn hours(&self) -> usize {
        hours_in_window(self.window.0, self.window.1)
    }

    /// Adds one record; records outside the window are rejected.
    pub fn push(&mut self, record: &TransferRecord) -> Result<()> {
        let (start, end) = self.window;
        if record.timestamp < start || record.timestamp >= end {
            return Err(Error::Domain(format!(
                "timestamp {} outside slice window [{start}, {end})",
                record.timestamp
            )));
        }
        let hour = ((record.timestamp - start) / SECONDS_PER_HOUR) as u32;
        self.rows += 1;
        let sender = self.senders.entry(record.sender_id.clone()).or_default();
        *sender.partners.entry(record.receiver_id.clone()).or_default() += 1;
        *sender.hours.entry(hour).or_default() += 1;
        let receiver = self.receivers.entry(record.receiver_id.clone()).or_default();
        *receiver.hours.entry(hour).or_default() += 1;
        Ok(())
    }

    pub fn merge(mut self, other: SliceAggregate) -> SliceAggregate {
        assert_eq!(self.window, other.window, "merging slices with different windows");
        self.rows += other.rows;
        for (id, acc) in other.senders {
            let mine = self.senders.entry(id).or_default();
            for (p, c) in acc.partners {
                *mine.partners.entry(p).or_default() += c;
            }
            add_hours(&mut mine.hours, acc.hours);
        }
        for (id, acc) in other.receivers {
            let mine = self.receivers.entry(id).or_default();
            add_hours(&mut mine.hours, acc.hours);
        }
        self
    }

    /// One profile per distinct sender, ordered by account id.
    pub fn sender_profiles(&self) -> Vec<SenderProfile> {
        let mut out: Vec<SenderProfile> = self
            .senders
            .iter()
            .map(|(id, acc)| SenderProfile {
                account_id: id.clone(),
                v: acc.partners.values().sum(),
                n: acc.partners.len() as u64,
            })
            .collect();
        out.sort_unstable_by(|a, b| a.account_id.cmp(&b.account_id));
        out
    }

    /// Per-account trade totals for `role`, ordered by account id.
    pub fn degree_sample(&self, role: Role) -> DegreeSample {
        let mut pairs: Vec<(&String, u64)> = match role {
            Role::Sender => self
                .senders
                .iter()
                .map(|(id, acc)| (id, acc.hours.values().sum()))
                .collect(),
            Role::Receiver => self
                .receivers
                .iter()
                .map(|(id, acc)| (id, acc.hours.values().sum()))
                .collect(),
        };
        pairs.sort_unstable_by(|a, b| a.0.cmp(b.0));
        DegreeSample {
            role,
            values: pairs.into_iter().map(|(_, v)| v).collect(),
        }
    }

    fn hours_of(&self, account_id: &str, role: Role) -> Option<&HashMap<u32, u64>> {
        match role {
            Role::Sender => self.senders.get(account_id).map(|a| &a.hours),
            Role::Receiver => self.receivers.get(account_id).map(|a| &a.hours),
        }
    }

    /// Dense hourly series; an unknown account yields all zeros.
    pub fn hourly_series(&self, account_id: &str, role: Role) -> HourlySeries {
        let mut counts = vec![0u64; self.hours()];
        if let Some(hours) = self.hours_of(account_id, role) {
            for (&h, &c) in hours {
                counts[h as usize] += c;
            }
        }
        HourlySeries {
            account_id: account_id.to_string(),
            role,
            counts,
        }
    }

    /// Dense series of every account with at least `activity_floor` non-zero
    /// hour bins, ordered by account id, plus the number of accounts that
    /// fell below the floor.
    pub fn active_series(&self, role: Role, activity_floor: usize) -> (Vec<HourlySeries>, usize) {
        let mut ids: Vec<&String> = match role {
            Role::Sender => self.senders.keys().collect(),
            Role::Receiver => self.receivers.keys().collect(),
        };
        ids.sort_unstable();
        let mut below = 0;
        let mut out = Vec::new();
        for id in ids {
            let active = self.hours_of(id, role).map_or(0, HashMap::len);
            if active >= activity_floor {
                out.push(self.hourly_series(id, role));
            } else {
                below += 1;
            }
        }
        (out, below)
    }

    /// Writes `account_id,V,N` rows.
    pub fn write_profiles<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "account_id,V,N")?;
        for p in self.sender_profiles() {
            writeln!(out, "{},{},{}", p.account_id, p.v, p.n)?;
        }
        Ok(())
    }

    /// Writes sparse `account_id,hour_index,count` rows for `role`.
    pub fn write_hourly<W: Write>(&self, role: Role, mut out: W) -> std::io::Result<()> {
        writeln!(out, "account_id,hour_index,count")?;
        let mut ids: Vec<&String> = match role {
            Role::Sender => self.senders.keys().collect(),
            Role::Receiver => self.receivers.keys().collect(),
        };
        ids.sort_unstable();
        for id in ids {
            let hours: BTreeMap<_, _> = self.hours_of(id, role).unwrap().iter().collect();
            for (h, c) in hours {
                writeln!(out, "{id},{h},{c}")?;
            }
        }
        Ok(())
    }
}

fn add_hours(into: &mut HashMap<u32, u64>, from: HashMap<u32, u64>) {
    for (h, c) in from {
        *into.entry(h).or_default() += c;
    }
}

/// Reads a profile spill file written by [`SliceAggregate::write_profiles`].
pub fn read_profiles<R: BufRead>(input: R) -> Result<Vec<SenderProfile>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<profiles>", e))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let row = i as u64 + 1;
        let mut parts = line.split(',');
        let (Some(id), Some(v), Some(n)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(row, "<row>", "expected account_id,V,N"));
        };
        let v = v.trim().parse().map_err(|_| Error::parse(row, "V", "not an integer"))?;
        let n = n.trim().parse().map_err(|_| Error::parse(row, "N", "not an integer"))?;
        out.push(SenderProfile {
            account_id: id.to_string(),
            v,
            n,
        });
    }
    Ok(out)
}

fn aggregate<'a, I>(records: I, window: (i64, i64)) -> Result<SliceAggregate>
where
    I: IntoIterator<Item = &'a TransferRecord>,
{
    let mut agg = SliceAggregate::new(window);
    for r in records {
        agg.push(r)?;
    }
    Ok(agg)
}

fn enclosing_window<'a, I>(records: I) -> (i64, i64)
where
    I: IntoIterator<Item = &'a TransferRecord>,
{
    records
        .into_iter()
        .fold(None, |acc: Option<(i64, i64)>, r| {
            Some(acc.map_or((r.timestamp, r.timestamp + 1), |(lo, hi)| {
                (lo.min(r.timestamp), hi.max(r.timestamp + 1))
            }))
        })
        .unwrap_or((0, 1))
}

/// Profiles of every sender in a slice's records.
pub fn sender_profiles(records: &[TransferRecord]) -> Vec<SenderProfile> {
    aggregate(records, enclosing_window(records))
        .expect("window encloses all records")
        .sender_profiles()
}

pub fn degree_sample(records: &[TransferRecord], role: Role) -> DegreeSample {
    aggregate(records, enclosing_window(records))
        .expect("window encloses all records")
        .degree_sample(role)
}

/// Hourly series of `account_id` over the period window `[start, end)`.
/// Records outside the window are an error.
pub fn hourly_series(
    records: &[TransferRecord],
    account_id: &str,
    role: Role,
    window: (i64, i64),
) -> Result<HourlySeries> {
    Ok(aggregate(records, window)?.hourly_series(account_id, role))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(s: &str, t: &str, ts: i64) -> TransferRecord {
        TransferRecord::new(s, t, false, false, ts).unwrap()
    }

    #[test]
    fn profile_counts() {
        let recs = [r("A", "B", 0), r("A", "B", 1), r("A", "C", 2)];
        let p = sender_profiles(&recs);
        assert_eq!(p, vec![SenderProfile { account_id: "A".into(), v: 3, n: 2 }]);
        let p = sender_profiles(&[r("A", "B", 5)]);
        assert_eq!((p[0].v, p[0].n), (1, 1));
    }

    #[test]
    fn self_transfer_counts_once() {
        let p = sender_profiles(&[r("A", "A", 0)]);
        assert_eq!((p[0].v, p[0].n), (1, 1));
    }

    #[test]
    fn uniform_construction_profiles() {
        let mut recs = Vec::new();
        for s in 0..100 {
            for t in 0..10 {
                for k in 0..7 {
                    recs.push(r(&format!("s{s}"), &format!("r{s}_{t}"), (s * 70 + t * 7 + k) as i64));
                }
            }
        }
        assert_eq!(recs.len(), 7000);
        let p = sender_profiles(&recs);
        assert_eq!(p.len(), 100);
        assert!(p.iter().all(|p| p.v == 70 && p.n == 10));
    }

    #[test]
    fn degree_samples_by_role() {
        let recs = [r("A", "B", 0), r("A", "C", 0), r("D", "B", 0)];
        let mut s = degree_sample(&recs, Role::Sender).values;
        s.sort();
        assert_eq!(s, vec![1, 2]);
        let mut s = degree_sample(&recs, Role::Receiver).values;
        s.sort();
        assert_eq!(s, vec![1, 2]);
        assert!(degree_sample(&[], Role::Sender).values.is_empty());
    }

    #[test]
    fn hourly_bins() {
        let start = 1_000_000;
        let window = (start, start + 24 * 3600);
        let recs = [r("A", "B", start), r("A", "B", start + 10), r("A", "C", start + 3600)];
        let s = hourly_series(&recs, "A", Role::Sender, window).unwrap();
        assert_eq!(s.len(), 24);
        assert_eq!(&s.counts[..3], &[2, 1, 0]);
        let s = hourly_series(&recs, "B", Role::Receiver, window).unwrap();
        assert_eq!(&s.counts[..2], &[2, 0]);
        let z = hourly_series(&recs, "nobody", Role::Sender, window).unwrap();
        assert_eq!(z.counts, vec![0; 24]);
        assert!(hourly_series(&recs, "A", Role::Sender, (0, 10)).is_err());
    }

    #[test]
    fn partial_hour_rounds_up() {
        assert_eq!(hours_in_window(0, 3600), 1);
        assert_eq!(hours_in_window(0, 3601), 2);
        assert_eq!(hours_in_window(0, 90 * 86400), 2160);
    }

    #[test]
    fn activity_floor_filters() {
        let window = (0, 10 * 3600);
        let mut agg = SliceAggregate::new(window);
        for h in 0..5 {
            agg.push(&r("busy", "x", h * 3600)).unwrap();
        }
        agg.push(&r("idle", "x", 0)).unwrap();
        let (series, below) = agg.active_series(Role::Sender, 3);
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].account_id, "busy");
        assert_eq!(below, 1);
    }

    #[test]
    fn spill_round_trip() {
        let mut agg = SliceAggregate::new((0, 7200));
        for rec in [r("A", "B", 0), r("A", "C", 4000), r("D", "B", 10)] {
            agg.push(&rec).unwrap();
        }
        let mut buf = Vec::new();
        agg.write_profiles(&mut buf).unwrap();
        assert_eq!(read_profiles(&buf[..]).unwrap(), agg.sender_profiles());
        let mut buf = Vec::new();
        agg.write_hourly(Role::Receiver, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "account_id,hour_index,count\nB,0,2\nC,1,1\n"
        );
    }

    fn arb_records() -> impl Strategy<Value = Vec<TransferRecord>> {
        proptest::collection::vec((0u8..8, 0u8..8, 0i64..50_000), 0..300).prop_map(|v| {
            v.into_iter()
                .map(|(s, t, ts)| r(&format!("a{s}"), &format!("a{t}"), ts))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn totals_and_pigeonhole(recs in arb_records()) {
            let profiles = sender_profiles(&recs);
            prop_assert_eq!(profiles.iter().map(|p| p.v).sum::<u64>(), recs.len() as u64);
            prop_assert!(profiles.iter().all(|p| 1 <= p.n && p.n <= p.v));
            prop_assert_eq!(degree_sample(&recs, Role::Receiver).values.iter().sum::<u64>(), recs.len() as u64);
        }

        #[test]
        fn order_and_chunk_invariance(recs in arb_records(), split in 0usize..300, seed in any::<u64>()) {
            let window = (0, 50_000);
            let whole = aggregate(&recs, window).unwrap();
            let mut shuffled = recs.clone();
            // cheap deterministic permutation
            let n = shuffled.len().max(1);
            shuffled.rotate_left((seed as usize) % n);
            shuffled.reverse();
            let split = split.min(shuffled.len());
            let (a, b) = shuffled.split_at(split);
            let merged = aggregate(b, window).unwrap().merge(aggregate(a, window).unwrap());
            prop_assert_eq!(merged.sender_profiles(), whole.sender_profiles());
            prop_assert_eq!(merged.degree_sample(Role::Receiver), whole.degree_sample(Role::Receiver));
            for role in Role::ALL {
                let (x, _) = merged.active_series(role, 1);
                let (y, _) = whole.active_series(role, 1);
                prop_assert_eq!(x, y);
            }
        }
    }
}
