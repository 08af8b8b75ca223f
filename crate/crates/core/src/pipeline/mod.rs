//! End-to-end runs: census, full analysis and scenario fabrication, each
//! writing stable, byte-deterministic outputs.

mod config;
mod report;

pub use config::{RunConfig, Stages};
pub use report::{
    plot_name, write_table1, write_tables, AnalysisReport, InputDigest, Provenance, ScalingCell,
    StationarityCell, TailCell, SCHEMA_VERSION,
};

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::activity::SliceAggregate;
use crate::error::{Error, Result};
use crate::ingest::{
    census_files, files_partition, input_files, open_source, stream_rows, Census, DatasetSummary,
    IngestConfig, Strictness,
};
use crate::model::{InteractionCategory, PeriodPartition, Role};
use crate::powerlaw::{analyze_tail, log_binned_density};
use crate::scaling::{fit_alpha, log_bin};
use crate::stationarity::stationary_fraction;
use crate::synth::{fabricate_ledger, ScenarioSpec, Sidecar, RNG_ALGORITHM};
use crate::taylor::{taylor_cell, TaylorCell, TaylorSlice};
use report::{write_json, write_plot};

pub const TOOL_NAME: &str = "tokenscale";

fn resolve_inputs(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.inputs.is_empty() {
        return Err(Error::Config("no input files given".into()));
    }
    let files = input_files(&cfg.inputs)?;
    if files.is_empty() {
        return Err(Error::Config("input directories contain no files".into()));
    }
    Ok(files)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Classification census; writes `census.json` and `table1.csv` under
/// `cfg.out`.
pub fn cmd_census(cfg: &RunConfig) -> Result<DatasetSummary> {
    cfg.validate()?;
    let files = resolve_inputs(cfg)?;
    info!("census of {} file(s)", files.len());
    let (summary, _) = census_files(&files, &cfg.ingest)?;
    create_dir(&cfg.out)?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Invariant(e.to_string()))?
        + "\n";
    write_json(&cfg.out.join("census.json"), &json)?;
    write_table1(&cfg.out.join("table1.csv"), &summary)?;
    Ok(summary)
}

/// Census plus one aggregate per (category, period), indexed
/// `(period - 1) * 4 + category`.
pub fn aggregate_files(
    files: &[PathBuf],
    cfg: &IngestConfig,
) -> Result<(DatasetSummary, Option<PeriodPartition>, Vec<SliceAggregate>)> {
    cfg.validate()?;
    let partition = files_partition(files, cfg)?;
    let k = partition.as_ref().map_or(cfg.periods.k(), PeriodPartition::k);
    let empty_grid = || -> Vec<SliceAggregate> {
        match &partition {
            Some(p) => (1..=p.k())
                .flat_map(|period| std::iter::repeat_n(p.window(period), 4))
                .map(SliceAggregate::new)
                .collect(),
            None => Vec::new(),
        }
    };
    let partials = files
        .par_iter()
        .map(|path| {
            let mut census = Census::new(k);
            let mut grid = empty_grid();
            let reader = open_source(path)?;
            stream_rows(reader, cfg, &path.display().to_string(), |row| {
                if let (Ok(r), Some(p)) = (&row, &partition) {
                    if let Some(period) = p.period_of(r.timestamp) {
                        grid[(period - 1) * 4 + r.category().index()].push(r)?;
                    }
                }
                census.observe(row, partition.as_ref(), cfg.strictness)
            })?;
            Ok((census, grid))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut census = Census::new(k);
    let mut grid = empty_grid();
    for (c, g) in partials {
        census = census.merge(c);
        grid = grid.into_iter().zip(g).map(|(a, b)| a.merge(b)).collect();
    }
    let summary = census.finish(partition.as_ref());
    summary.check_conservation()?;
    Ok((summary, partition, grid))
}

struct Plot {
    name: String,
    header: &'static str,
    rows: Vec<Vec<f64>>,
}

#[derive(Default)]
struct SliceOutput {
    scaling: Option<ScalingCell>,
    tails: Vec<TailCell>,
    stationarity: Vec<StationarityCell>,
    taylor: Vec<TaylorCell>,
    plots: Vec<Plot>,
}

fn analyze_slice(
    category: InteractionCategory,
    period: usize,
    agg: Option<&SliceAggregate>,
    cfg: &RunConfig,
) -> SliceOutput {
    let mut out = SliceOutput::default();
    let stages = cfg.stages;
    let Some(agg) = agg else {
        let reason = Some("no well-formed rows, periods undefined".to_string());
        if stages.scaling {
            out.scaling = Some(ScalingCell { category, period, senders: 0, fit: None, reason: reason.clone() });
        }
        for role in Role::ALL {
            if stages.powerlaw {
                out.tails.push(TailCell { category, period, role, accounts: 0, fit: None, reason: reason.clone() });
            }
            if stages.kpss {
                out.stationarity.push(StationarityCell { category, period, role, summary: None, reason: reason.clone() });
            }
            if stages.taylor {
                out.taylor.push(TaylorCell {
                    category,
                    period,
                    role,
                    activity_floor: cfg.activity_floor,
                    accounts_in_slice: 0,
                    excluded_flat: 0,
                    fit: None,
                    reason: reason.clone(),
                });
            }
        }
        return out;
    };

    if stages.scaling {
        let profiles = agg.sender_profiles();
        let fit = if profiles.is_empty() {
            Err(Error::InsufficientData("no senders in slice".into()))
        } else {
            log_bin(&profiles, cfg.n_bins, cfg.abscissa).and_then(|curve| {
                out.plots.push(Plot {
                    name: plot_name("table2", category, period, Role::Sender),
                    header: "N\tmean_V\tsenders",
                    rows: curve.bins.iter().map(|b| vec![b.abscissa, b.mean_v, b.count as f64]).collect(),
                });
                fit_alpha(&curve)
            })
        };
        out.scaling = Some(ScalingCell {
            category,
            period,
            senders: profiles.len(),
            reason: fit.as_ref().err().map(ToString::to_string),
            fit: fit.ok(),
        });
    }

    for role in Role::ALL {
        if stages.powerlaw {
            let sample = agg.degree_sample(role);
            let fit = analyze_tail(&sample, &cfg.tail_config());
            if !sample.values.is_empty() {
                out.plots.push(Plot {
                    name: plot_name("table3", category, period, role),
                    header: "trades\tdensity",
                    rows: log_binned_density(&sample.values, cfg.n_bins)
                        .into_iter()
                        .map(|(x, p)| vec![x, p])
                        .collect(),
                });
            }
            out.tails.push(TailCell {
                category,
                period,
                role,
                accounts: sample.values.len(),
                reason: fit.as_ref().err().map(ToString::to_string),
                fit: fit.ok(),
            });
        }
        if !(stages.kpss || stages.taylor) {
            continue;
        }
        let (series, below) = agg.active_series(role, cfg.activity_floor);
        if stages.kpss {
            let summary = stationary_fraction(&series, &cfg.kpss_config()).map(|mut s| {
                s.below_floor += below;
                s
            });
            let reason = match &summary {
                Ok(s) if s.tested == 0 => Some("no account reaches the activity floor".to_string()),
                Ok(_) => None,
                Err(e) => Some(e.to_string()),
            };
            out.stationarity.push(StationarityCell { category, period, role, summary: summary.ok(), reason });
        }
        if stages.taylor {
            let slice = TaylorSlice { category, period, role, series: &series, pre_filtered: below };
            match taylor_cell(&slice, cfg.activity_floor) {
                Ok((cell, points)) => {
                    if !points.is_empty() {
                        out.plots.push(Plot {
                            name: plot_name("table5", category, period, role),
                            header: "mean\tvariance",
                            rows: points.iter().map(|p| vec![p.mu, p.var]).collect(),
                        });
                    }
                    out.taylor.push(cell);
                }
                Err(e) => out.taylor.push(TaylorCell {
                    category,
                    period,
                    role,
                    activity_floor: cfg.activity_floor,
                    accounts_in_slice: series.len() + below,
                    excluded_flat: 0,
                    fit: None,
                    reason: Some(e.to_string()),
                }),
            }
        }
    }
    out
}

fn digest(path: &Path) -> Result<InputDigest> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        bytes,
        sha256: hex::encode(hasher.finalize()),
    })
}

/// Runs every enabled stage over every slice and writes `report.json`,
/// `table1.csv`..`table5.csv` and `plots/*.dat` under `cfg.out`.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let files = resolve_inputs(cfg)?;
    info!("analyzing {} file(s)", files.len());
    let (census, partition, grid) = aggregate_files(&files, &cfg.ingest)?;
    let inputs = files.par_iter().map(|p| digest(p)).collect::<Result<Vec<_>>>()?;
    let k = census.periods;

    let cells: Vec<(InteractionCategory, usize)> = InteractionCategory::ALL
        .into_iter()
        .flat_map(|c| (1..=k).map(move |p| (c, p)))
        .collect();
    let outputs: Vec<SliceOutput> = cells
        .par_iter()
        .map(|&(c, p)| {
            let agg = partition.as_ref().map(|_| &grid[(p - 1) * 4 + c.index()]);
            info!("slice {c} period {p}");
            analyze_slice(c, p, agg, cfg)
        })
        .collect();

    let stages = cfg.stages;
    let mut report = AnalysisReport {
        schema_version: SCHEMA_VERSION.to_string(),
        census,
        scaling: stages.scaling.then(Vec::new),
        tails: stages.powerlaw.then(Vec::new),
        stationarity: stages.kpss.then(Vec::new),
        taylor: stages.taylor.then(Vec::new),
        provenance: Provenance {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            rng: RNG_ALGORITHM.to_string(),
            config: cfg.clone(),
            inputs,
        },
    };
    let plot_dir = cfg.out.join("plots");
    create_dir(&cfg.out)?;
    if stages.scaling || stages.powerlaw || stages.taylor {
        create_dir(&plot_dir)?;
    }
    for out in outputs {
        if let (Some(v), Some(c)) = (report.scaling.as_mut(), out.scaling) {
            v.push(c);
        }
        if let Some(v) = report.tails.as_mut() {
            v.extend(out.tails);
        }
        if let Some(v) = report.stationarity.as_mut() {
            v.extend(out.stationarity);
        }
        if let Some(v) = report.taylor.as_mut() {
            v.extend(out.taylor);
        }
        for plot in out.plots {
            write_plot(&plot_dir, &plot.name, plot.header, &plot.rows)?;
        }
    }
    write_json(&cfg.out.join("report.json"), &report.to_json()?)?;
    write_tables(&cfg.out, &report)?;
    Ok(report)
}

/// Paths written by [`cmd_synth`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub ledger: PathBuf,
    pub sidecar: PathBuf,
}

/// Fabricates `ledger.csv` and `sidecar.json` in `out` from a scenario file.
pub fn cmd_synth(scenario: &Path, seed: u64, out: &Path) -> Result<(SynthOutput, Sidecar)> {
    let text = fs::read_to_string(scenario).map_err(|e| Error::io(scenario, e))?;
    let spec = ScenarioSpec::from_toml(&text)?;
    spec.validate()?;
    create_dir(out)?;
    let paths = SynthOutput {
        ledger: out.join("ledger.csv"),
        sidecar: out.join("sidecar.json"),
    };
    let sidecar = fabricate_ledger(&spec, seed, &paths.ledger, Some(&paths.sidecar))?;
    info!("wrote {} rows to {}", sidecar.rows, paths.ledger.display());
    Ok((paths, sidecar))
}

/// Ingest settings matching a fabricated ledger: its exact period
/// boundaries and fail-fast parsing.
pub fn ingest_for_sidecar(sidecar: &Sidecar) -> IngestConfig {
    IngestConfig {
        periods: crate::ingest::PeriodSpec::Boundaries(sidecar.boundaries.clone()),
        strictness: Strictness::FailFast,
        ..IngestConfig::default()
    }
}
