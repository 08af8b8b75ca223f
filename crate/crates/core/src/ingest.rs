//! Streaming ingestion of delimited transfer ledgers and the per-category,
//! per-period transaction census.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{InteractionCategory, PeriodPartition, TransferRecord};

/// A column addressed either by header name or by 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub from: ColumnRef,
    pub to: ColumnRef,
    pub from_is_contract: ColumnRef,
    pub to_is_contract: ColumnRef,
    pub timestamp: ColumnRef,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            from: "from".into(),
            to: "to".into(),
            from_is_contract: "fromIsContract".into(),
            to_is_contract: "toIsContract".into(),
            timestamp: "timestamp".into(),
        }
    }
}

/// How the observation window is cut into periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PeriodSpec {
    /// `k` equal-duration periods over the observed `[min_ts, max_ts + 1)`.
    Equal(usize),
    /// Explicit ascending boundaries (Unix seconds); `k = len - 1`.
    Boundaries(Vec<i64>),
}

impl Default for PeriodSpec {
    fn default() -> Self {
        PeriodSpec::Equal(3)
    }
}

impl PeriodSpec {
    /// Parses `"3"` or a comma-separated list of boundaries, each either a
    /// Unix timestamp or a `YYYY-MM-DD` date (midnight UTC).
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if !text.contains(',') {
            if let Ok(k) = text.parse::<usize>() {
                if k == 0 {
                    return Err(Error::Config("number of periods must be >= 1".into()));
                }
                return Ok(PeriodSpec::Equal(k));
            }
        }
        let bounds = text
            .split(',')
            .map(parse_boundary)
            .collect::<Result<Vec<_>>>()?;
        PeriodPartition::from_boundaries(bounds.clone())?;
        Ok(PeriodSpec::Boundaries(bounds))
    }

    pub fn k(&self) -> usize {
        match self {
            PeriodSpec::Equal(k) => *k,
            PeriodSpec::Boundaries(b) => b.len().saturating_sub(1),
        }
    }
}

fn parse_boundary(text: &str) -> Result<i64> {
    let text = text.trim();
    if let Ok(ts) = text.parse::<i64>() {
        return Ok(ts);
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
        .map_err(|_| Error::Config(format!("bad period boundary `{text}`")))
}

impl Serialize for PeriodSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PeriodSpec::Equal(k) => serializer.serialize_u64(*k as u64),
            PeriodSpec::Boundaries(b) => b.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for PeriodSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Bound {
            Ts(i64),
            Date(String),
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
            List(Vec<Bound>),
        }
        use serde::de::Error as _;
        match Raw::deserialize(deserializer)? {
            Raw::Count(0) => Err(D::Error::custom("number of periods must be >= 1")),
            Raw::Count(k) => Ok(PeriodSpec::Equal(k)),
            Raw::Text(t) => PeriodSpec::parse(&t).map_err(D::Error::custom),
            Raw::List(list) => {
                let bounds = list
                    .into_iter()
                    .map(|b| match b {
                        Bound::Ts(t) => Ok(t),
                        Bound::Date(d) => parse_boundary(&d),
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(D::Error::custom)?;
                PeriodPartition::from_boundaries(bounds.clone()).map_err(D::Error::custom)?;
                Ok(PeriodSpec::Boundaries(bounds))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strictness {
    FailFast,
    #[default]
    SkipAndCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub columns: ColumnMap,
    pub delimiter: char,
    pub has_header: bool,
    pub periods: PeriodSpec,
    pub strictness: Strictness,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            columns: ColumnMap::default(),
            delimiter: ',',
            has_header: true,
            periods: PeriodSpec::default(),
            strictness: Strictness::default(),
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() || self.delimiter.is_ascii_control() && self.delimiter != '\t'
        {
            return Err(Error::Config(format!(
                "delimiter must be a single printable ASCII character, got {:?}",
                self.delimiter
            )));
        }
        if self.periods.k() == 0 {
            return Err(Error::Config("number of periods must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolves the column map against an optional header row.
    pub fn resolve(&self, header: Option<&[&str]>) -> Result<ResolvedColumns> {
        let find = |what: &str, col: &ColumnRef| -> Result<usize> {
            match col {
                ColumnRef::Index(i) => Ok(*i),
                ColumnRef::Name(name) => header
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "column `{what}` is addressed by name `{name}` but the input has no header"
                        ))
                    })?
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| {
                        Error::Config(format!("header has no column `{name}` (for `{what}`)"))
                    }),
            }
        };
        let c = &self.columns;
        Ok(ResolvedColumns {
            from: find("from", &c.from)?,
            to: find("to", &c.to)?,
            from_is_contract: find("fromIsContract", &c.from_is_contract)?,
            to_is_contract: find("toIsContract", &c.to_is_contract)?,
            timestamp: find("timestamp", &c.timestamp)?,
        })
    }
}

/// Column positions after header resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedColumns {
    pub from: usize,
    pub to: usize,
    pub from_is_contract: usize,
    pub to_is_contract: usize,
    pub timestamp: usize,
}

impl Default for ResolvedColumns {
    fn default() -> Self {
        ResolvedColumns {
            from: 0,
            to: 1,
            from_is_contract: 2,
            to_is_contract: 3,
            timestamp: 4,
        }
    }
}

fn parse_flag(text: &str, row: u64, column: &str) -> Result<bool> {
    match text.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        t if t.eq_ignore_ascii_case("false") => Ok(false),
        t if t.eq_ignore_ascii_case("true") => Ok(true),
        t => Err(Error::parse(
            row,
            column,
            format!("contract flag must be 0/1 or false/true, got `{t}`"),
        )),
    }
}

/// Parses one delimited row. `row` is the 1-based line number used in errors.
pub fn parse_record<S: AsRef<str>>(
    fields: &[S],
    columns: &ResolvedColumns,
    row: u64,
) -> Result<TransferRecord> {
    let get = |idx: usize, name: &str| -> Result<&str> {
        fields
            .get(idx)
            .map(|f| f.as_ref().trim())
            .ok_or_else(|| Error::parse(row, name, "missing column"))
    };
    let sender = get(columns.from, "from")?;
    if sender.is_empty() {
        return Err(Error::parse(row, "from", "empty address"));
    }
    let receiver = get(columns.to, "to")?;
    if receiver.is_empty() {
        return Err(Error::parse(row, "to", "empty address"));
    }
    let sender_is_contract = parse_flag(
        get(columns.from_is_contract, "fromIsContract")?,
        row,
        "fromIsContract",
    )?;
    let receiver_is_contract = parse_flag(
        get(columns.to_is_contract, "toIsContract")?,
        row,
        "toIsContract",
    )?;
    let ts_text = get(columns.timestamp, "timestamp")?;
    let timestamp: i64 = ts_text.parse().map_err(|_| {
        Error::parse(
            row,
            "timestamp",
            format!("expected a base-10 integer, got `{ts_text}`"),
        )
    })?;
    if timestamp < 0 {
        return Err(Error::parse(row, "timestamp", "negative timestamp"));
    }
    Ok(TransferRecord {
        sender_id: sender.to_string(),
        receiver_id: receiver.to_string(),
        sender_is_contract,
        receiver_is_contract,
        timestamp,
    })
}

/// Calendar date (`YYYY-MM-DD`, UTC) of a Unix timestamp.
pub fn to_utc_date(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|dt| dt.date_naive().format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| format!("<out of range: {ts}>"))
}

/// Expands the given paths into an ordered list of input files. Directories
/// contribute their regular, non-hidden files in name order.
pub fn input_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
        if meta.is_dir() {
            let mut shards = Vec::new();
            for entry in std::fs::read_dir(path).map_err(|e| Error::io(path, e))? {
                let entry = entry.map_err(|e| Error::io(path, e))?;
                let p = entry.path();
                let hidden = p
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with('.'));
                if p.is_file() && !hidden {
                    shards.push(p);
                }
            }
            shards.sort();
            out.extend(shards);
        } else {
            out.push(path.clone());
        }
    }
    Ok(out)
}

pub fn open_source(path: &Path) -> Result<Box<dyn Read + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 16, file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(MultiGzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

/// Streams every row of one delimited source into `visit`, which receives the
/// parse outcome of each data row. Returns the number of data rows read.
pub fn stream_rows<R: Read>(
    reader: R,
    cfg: &IngestConfig,
    label: &str,
    mut visit: impl FnMut(Result<TransferRecord>) -> Result<()>,
) -> Result<u64> {
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter as u8)
        .has_headers(cfg.has_header)
        .flexible(true)
        .from_reader(reader);
    let columns = if cfg.has_header {
        let header = csv
            .headers()
            .map_err(|e| csv_error(label, e))?
            .iter()
            .map(str::to_owned)
            .collect::<Vec<_>>();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        cfg.resolve(Some(&header))?
    } else {
        cfg.resolve(None)?
    };
    let mut record = csv::StringRecord::new();
    let mut rows = 0u64;
    loop {
        match csv.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                rows += 1;
                let line = e.position().map_or(0, |p| p.line());
                if e.is_io_error() {
                    return Err(csv_error(label, e));
                }
                visit(Err(Error::parse(line, "<row>", format!("{label}: {e}"))))?;
                continue;
            }
        }
        rows += 1;
        let line = record.position().map_or(rows, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        let parsed = parse_record(&fields, &columns, line).map_err(|e| match e {
            Error::Parse {
                row,
                column,
                message,
            } => Error::Parse {
                row,
                column,
                message: format!("{label}: {message}"),
            },
            other => other,
        });
        visit(parsed)?;
    }
    Ok(rows)
}

fn csv_error(label: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(label, io),
        other => Error::parse(0, "<header>", format!("{label}: {other:?}")),
    }
}

/// Streams every row of every file in order.
pub fn stream_files(
    files: &[PathBuf],
    cfg: &IngestConfig,
    mut visit: impl FnMut(Result<TransferRecord>) -> Result<()>,
) -> Result<u64> {
    let mut rows = 0;
    for path in files {
        let reader = open_source(path)?;
        rows += stream_rows(reader, cfg, &path.display().to_string(), &mut visit)?;
    }
    Ok(rows)
}

/// Observed timestamp span of the well-formed rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub min_ts: Option<i64>,
    pub max_ts: Option<i64>,
}

impl Span {
    fn observe(&mut self, ts: i64) {
        self.min_ts = Some(self.min_ts.map_or(ts, |m| m.min(ts)));
        self.max_ts = Some(self.max_ts.map_or(ts, |m| m.max(ts)));
    }

    fn merge(self, other: Span) -> Span {
        let pick = |a: Option<i64>, b: Option<i64>, f: fn(i64, i64) -> i64| match (a, b) {
            (Some(x), Some(y)) => Some(f(x, y)),
            (x, None) => x,
            (None, y) => y,
        };
        Span {
            min_ts: pick(self.min_ts, other.min_ts, i64::min),
            max_ts: pick(self.max_ts, other.max_ts, i64::max),
        }
    }
}

/// Resolves the period spec into a concrete partition. Equal-duration specs
/// need the observed span; `None` when there is no well-formed row.
pub fn resolve_partition(spec: &PeriodSpec, span: Span) -> Result<Option<PeriodPartition>> {
    match spec {
        PeriodSpec::Boundaries(b) => PeriodPartition::from_boundaries(b.clone()).map(Some),
        PeriodSpec::Equal(k) => match (span.min_ts, span.max_ts) {
            (Some(lo), Some(hi)) => {
                // a span shorter than k seconds cannot be split; widen it
                let end = (hi + 1).max(lo + *k as i64);
                PeriodPartition::equal(lo, end, *k).map(Some)
            }
            _ => Ok(None),
        },
    }
}

/// Partial census over any subset of rows. Merging partial censuses is
/// associative and commutative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Census {
    counts: Vec<[u64; 4]>,
    rows_read: u64,
    malformed: u64,
    out_of_span: u64,
    span: Span,
}

impl Census {
    pub fn new(k: usize) -> Self {
        Census {
            counts: vec![[0; 4]; k],
            rows_read: 0,
            malformed: 0,
            out_of_span: 0,
            span: Span::default(),
        }
    }

    /// Folds one row outcome. Malformed rows are tallied in skip mode and
    /// returned as errors in fail-fast mode.
    pub fn observe(
        &mut self,
        row: Result<TransferRecord>,
        partition: Option<&PeriodPartition>,
        strictness: Strictness,
    ) -> Result<()> {
        self.rows_read += 1;
        let record = match row {
            Ok(r) => r,
            Err(e @ Error::Parse { .. }) => {
                if strictness == Strictness::FailFast {
                    return Err(e);
                }
                self.malformed += 1;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        self.span.observe(record.timestamp);
        match partition.and_then(|p| p.period_of(record.timestamp)) {
            Some(period) => self.counts[period - 1][record.category().index()] += 1,
            None => self.out_of_span += 1,
        }
        Ok(())
    }

    pub fn merge(mut self, other: Census) -> Census {
        assert_eq!(self.counts.len(), other.counts.len(), "period count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.rows_read += other.rows_read;
        self.malformed += other.malformed;
        self.out_of_span += other.out_of_span;
        self.span = self.span.merge(other.span);
        self
    }

    pub fn finish(self, partition: Option<&PeriodPartition>) -> DatasetSummary {
        let categories = InteractionCategory::ALL
            .into_iter()
            .map(|c| {
                let per_period: Vec<u64> = self.counts.iter().map(|p| p[c.index()]).collect();
                CategoryCounts {
                    category: c,
                    total: per_period.iter().sum(),
                    per_period,
                }
            })
            .collect::<Vec<_>>();
        let total = categories.iter().map(|c| c.total).sum();
        let period_totals = self.counts.iter().map(|p| p.iter().sum()).collect();
        let boundaries = partition.map(|p| p.boundaries().to_vec()).unwrap_or_default();
        DatasetSummary {
            periods: self.counts.len(),
            boundaries_utc: boundaries.iter().map(|&b| to_utc_date(b)).collect(),
            boundaries,
            categories,
            period_totals,
            total,
            rows_read: self.rows_read,
            malformed_rows: self.malformed,
            out_of_span_rows: self.out_of_span,
            min_ts: self.span.min_ts,
            max_ts: self.span.max_ts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryCounts {
    pub category: InteractionCategory,
    /// Ascending period order.
    pub per_period: Vec<u64>,
    pub total: u64,
}

/// Transaction census by interaction category and period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSummary {
    pub periods: usize,
    /// Period boundaries in Unix seconds; empty when no row fixed the span.
    pub boundaries: Vec<i64>,
    pub boundaries_utc: Vec<String>,
    /// Fixed order EOA_EOA, EOA_SC, SC_EOA, SC_SC.
    pub categories: Vec<CategoryCounts>,
    pub period_totals: Vec<u64>,
    pub total: u64,
    pub rows_read: u64,
    pub malformed_rows: u64,
    pub out_of_span_rows: u64,
    pub min_ts: Option<i64>,
    pub max_ts: Option<i64>,
}

impl DatasetSummary {
    pub fn count(&self, category: InteractionCategory, period: usize) -> u64 {
        self.categories[category.index()].per_period[period - 1]
    }

    pub fn check_conservation(&self) -> Result<()> {
        if self.total + self.malformed_rows + self.out_of_span_rows != self.rows_read {
            return Err(Error::Invariant(format!(
                "census does not conserve rows: {} + {} + {} != {}",
                self.total, self.malformed_rows, self.out_of_span_rows, self.rows_read
            )));
        }
        Ok(())
    }
}

/// Census of an in-memory row stream against a fixed partition.
pub fn ingest_census<I>(
    rows: I,
    partition: Option<&PeriodPartition>,
    k: usize,
    strictness: Strictness,
) -> Result<DatasetSummary>
where
    I: IntoIterator<Item = Result<TransferRecord>>,
{
    let mut census = Census::new(partition.map_or(k, PeriodPartition::k));
    for row in rows {
        census.observe(row, partition, strictness)?;
    }
    Ok(census.finish(partition))
}

/// Scans the timestamp span of all files; shards are scanned in parallel.
pub fn scan_span(files: &[PathBuf], cfg: &IngestConfig) -> Result<Span> {
    files
        .par_iter()
        .map(|path| {
            let mut span = Span::default();
            let reader = open_source(path)?;
            stream_rows(reader, cfg, &path.display().to_string(), |row| match row {
                Ok(r) => {
                    span.observe(r.timestamp);
                    Ok(())
                }
                Err(e) if cfg.strictness == Strictness::FailFast => Err(e),
                Err(_) => Ok(()),
            })?;
            Ok(span)
        })
        .try_reduce(Span::default, |a, b| Ok(a.merge(b)))
}

/// Partition for a set of files; equal-duration periods scan the span first.
pub fn files_partition(files: &[PathBuf], cfg: &IngestConfig) -> Result<Option<PeriodPartition>> {
    match &cfg.periods {
        PeriodSpec::Boundaries(_) => resolve_partition(&cfg.periods, Span::default()),
        PeriodSpec::Equal(_) => resolve_partition(&cfg.periods, scan_span(files, cfg)?),
    }
}

/// Census of files on disk. Shards are processed in parallel and merged.
/// Equal-duration periods need a preliminary span scan.
pub fn census_files(
    files: &[PathBuf],
    cfg: &IngestConfig,
) -> Result<(DatasetSummary, Option<PeriodPartition>)> {
    cfg.validate()?;
    let partition = files_partition(files, cfg)?;
    let k = partition.as_ref().map_or(cfg.periods.k(), PeriodPartition::k);
    let partials = files
        .par_iter()
        .map(|path| {
            let mut census = Census::new(k);
            let reader = open_source(path)?;
            stream_rows(reader, cfg, &path.display().to_string(), |row| {
                census.observe(row, partition.as_ref(), cfg.strictness)
            })?;
            Ok(census)
        })
        .collect::<Result<Vec<_>>>()?;
    let census = partials
        .into_iter()
        .fold(Census::new(k), Census::merge);
    let summary = census.finish(partition.as_ref());
    summary.check_conservation()?;
    Ok((summary, partition))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> ResolvedColumns {
        ResolvedColumns::default()
    }

    #[test]
    fn parse_valid_row() {
        let r = parse_record(&["0xabc", "0xdef", "0", "1", "1512086400"], &cols(), 2).unwrap();
        assert_eq!(r.category(), InteractionCategory::EoaSc);
        assert_eq!(r.timestamp, 1512086400);
        let r = parse_record(&["a", "b", "true", "FALSE", "7"], &cols(), 2).unwrap();
        assert_eq!(r.category(), InteractionCategory::ScEoa);
    }

    #[test]
    fn parse_errors_name_the_column() {
        let e = parse_record(&["0xabc", "0xdef", "2", "0", "1512086400"], &cols(), 9).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 9, ref column, .. } if column == "fromIsContract"));
        let e = parse_record(&["0xabc", "0xdef", "0", "0", "notanum"], &cols(), 3).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 3, ref column, .. } if column == "timestamp"));
        let e = parse_record(&["0xabc", "0xdef", "0", "0"], &cols(), 4).unwrap_err();
        assert!(matches!(e, Error::Parse { ref message, .. } if message == "missing column"));
        let e = parse_record(&["", "0xdef", "0", "0", "1"], &cols(), 5).unwrap_err();
        assert!(matches!(e, Error::Parse { ref column, .. } if column == "from"));
        let e = parse_record(&["a", "b", "0", "0", "-1"], &cols(), 6).unwrap_err();
        assert!(matches!(e, Error::Parse { ref column, .. } if column == "timestamp"));
    }

    #[test]
    fn utc_dates() {
        assert_eq!(to_utc_date(1512086400), "2017-12-01");
        assert_eq!(to_utc_date(0), "1970-01-01");
        assert_eq!(to_utc_date(86399), "1970-01-01");
        assert_eq!(to_utc_date(86400), "1970-01-02");
    }

    #[test]
    fn period_spec_parsing() {
        assert_eq!(PeriodSpec::parse("3").unwrap(), PeriodSpec::Equal(3));
        assert!(PeriodSpec::parse("0").is_err());
        let spec = PeriodSpec::parse("2017-07-01,2017-10-01,1514764800").unwrap();
        assert_eq!(
            spec,
            PeriodSpec::Boundaries(vec![1498867200, 1506816000, 1514764800])
        );
        assert!(PeriodSpec::parse("2017-10-01,2017-07-01").is_err());
        assert!(PeriodSpec::parse("July").is_err());
    }

    #[test]
    fn resolve_by_name_and_index() {
        let cfg = IngestConfig::default();
        let header = ["timestamp", "to", "from", "toIsContract", "fromIsContract"];
        let r = cfg.resolve(Some(&header)).unwrap();
        assert_eq!((r.from, r.to, r.timestamp), (2, 1, 0));
        assert!(cfg.resolve(None).is_err());
        assert!(cfg.resolve(Some(&["from", "to"])).is_err());
    }

    fn rec(flags: (bool, bool), ts: i64) -> Result<TransferRecord> {
        TransferRecord::new("a", "b", flags.0, flags.1, ts)
    }

    #[test]
    fn census_one_row_per_category() {
        let p = PeriodPartition::equal(0, 100, 1).unwrap();
        let rows = InteractionCategory::ALL.map(|c| rec(c.flags(), 10));
        let s = ingest_census(rows, Some(&p), 1, Strictness::FailFast).unwrap();
        assert!(s.categories.iter().all(|c| c.total == 1));
        assert_eq!(s.total, 4);
        s.check_conservation().unwrap();
    }

    #[test]
    fn census_empty() {
        let s = ingest_census(Vec::new(), None, 3, Strictness::FailFast).unwrap();
        assert_eq!(s.total, 0);
        assert_eq!(s.rows_read, 0);
        assert!(s.categories.iter().all(|c| c.per_period == vec![0, 0, 0]));
    }

    #[test]
    fn census_strictness_and_out_of_span() {
        let p = PeriodPartition::equal(0, 100, 2).unwrap();
        let bad = || Err(Error::parse(3, "timestamp", "bad"));
        let rows = || vec![rec((false, false), 10), bad(), rec((true, true), 500)];
        let s = ingest_census(rows(), Some(&p), 2, Strictness::SkipAndCount).unwrap();
        assert_eq!((s.total, s.malformed_rows, s.out_of_span_rows), (1, 1, 1));
        s.check_conservation().unwrap();
        let e = ingest_census(rows(), Some(&p), 2, Strictness::FailFast).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn census_merge_equals_whole() {
        let p = PeriodPartition::equal(0, 1000, 3).unwrap();
        let rows: Vec<TransferRecord> = (0..200)
            .map(|i| rec(((i % 2) == 0, (i % 3) == 0), (i * 7) % 1100).unwrap())
            .collect();
        let whole =
            ingest_census(rows.iter().cloned().map(Ok), Some(&p), 3, Strictness::SkipAndCount)
                .unwrap();
        let (a, b) = rows.split_at(77);
        let mut ca = Census::new(3);
        for r in a {
            ca.observe(Ok(r.clone()), Some(&p), Strictness::SkipAndCount).unwrap();
        }
        let mut cb = Census::new(3);
        for r in b {
            cb.observe(Ok(r.clone()), Some(&p), Strictness::SkipAndCount).unwrap();
        }
        assert_eq!(cb.clone().merge(ca.clone()).finish(Some(&p)), whole);
        assert_eq!(ca.merge(cb).finish(Some(&p)), whole);
    }

    #[test]
    fn stream_rows_reports_line_numbers() {
        let text = "from,to,fromIsContract,toIsContract,timestamp\na,b,0,0,1\na,b,0,0,x\n";
        let mut errors = Vec::new();
        let n = stream_rows(text.as_bytes(), &IngestConfig::default(), "mem", |r| {
            if let Err(e) = r {
                errors.push(e);
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 2);
        assert!(matches!(errors[0], Error::Parse { row: 3, .. }));
    }
}
