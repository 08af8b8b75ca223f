use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tokenscale::ingest::{PeriodSpec, Strictness};
use tokenscale::pipeline::{cmd_analyze, cmd_census, cmd_synth, RunConfig};
use tokenscale::stationarity::KpssVariant;
use tokenscale::{Error, Result};

#[derive(Parser)]
#[command(name = "tokenscale", about = "Scaling-law analytics for token-transfer ledgers")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count transfers per interaction category and period.
    Census(RunArgs),
    /// Run every enabled analysis stage and write the report.
    Analyze(RunArgs),
    /// Fabricate a ledger and its ground-truth sidecar from a scenario file.
    Synth {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synth-out")]
        out: PathBuf,
    },
    /// Print the tool version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Level,
    Trend,
}

#[derive(Args)]
struct RunArgs {
    /// Input files or directories of shards; added to those in the config.
    inputs: Vec<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of equal periods, or comma-separated boundaries
    /// (Unix seconds or YYYY-MM-DD).
    #[arg(long)]
    periods: Option<String>,
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    n_tail_min: Option<usize>,
    #[arg(long)]
    activity_floor: Option<usize>,
    #[arg(long, value_enum)]
    kpss_variant: Option<VariantArg>,
    /// Stop at the first malformed row.
    #[arg(long)]
    fail_fast: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    /// Config file first, then flags on top.
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.inputs.extend(self.inputs);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.periods {
            cfg.ingest.periods = PeriodSpec::parse(p)?;
        }
        if let Some(n) = self.n_bins {
            cfg.n_bins = n;
        }
        if let Some(n) = self.n_tail_min {
            cfg.n_tail_min = n;
        }
        if let Some(n) = self.activity_floor {
            cfg.activity_floor = n;
        }
        if let Some(v) = self.kpss_variant {
            cfg.kpss_variant = match v {
                VariantArg::Level => KpssVariant::Level,
                VariantArg::Trend => KpssVariant::Trend,
            };
        }
        if self.fail_fast {
            cfg.ingest.strictness = Strictness::FailFast;
        }
        if let Some(out) = self.out {
            cfg.out = out;
        }
        Ok(cfg)
    }
}

/// Writes one line to stdout; a closed pipe (`| head`) is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Census(args) => {
            let cfg = args.resolve()?;
            let summary = cmd_census(&cfg)?;
            let json = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Invariant(e.to_string()))?;
            emit(&json)?;
        }
        Command::Analyze(args) => {
            let cfg = args.resolve()?;
            cmd_analyze(&cfg)?;
            emit(&cfg.out.join("report.json").display().to_string())?;
        }
        Command::Synth { scenario, seed, out } => {
            let (paths, _) = cmd_synth(&scenario, seed, &out)?;
            emit(&paths.sidecar.display().to_string())?;
        }
        Command::Version => emit(&format!("tokenscale {}", env!("CARGO_PKG_VERSION")))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // usage mistakes are config errors
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
