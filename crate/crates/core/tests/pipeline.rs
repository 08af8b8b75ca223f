use std::fs;
use std::path::{Path, PathBuf};

use tokenscale::ingest::{census_files, PeriodSpec};
use tokenscale::model::{InteractionCategory, Role};
use tokenscale::pipeline::{
    cmd_analyze, cmd_census, cmd_synth, ingest_for_sidecar, AnalysisReport, RunConfig, Stages,
};
use tokenscale::synth::Sidecar;
use tokenscale::Error;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn synth(name: &str, seed: u64, dir: &Path) -> (PathBuf, Sidecar) {
    let (paths, sidecar) = cmd_synth(&scenario(name), seed, dir).unwrap();
    (paths.ledger, sidecar)
}

fn run_config(ledger: &Path, sidecar: &Sidecar, out: &Path) -> RunConfig {
    RunConfig {
        inputs: vec![ledger.to_path_buf()],
        ingest: ingest_for_sidecar(sidecar),
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn minimal_scenario_census() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("minimal.toml", 1, dir.path());
    assert!(dir.path().join("sidecar.json").exists());
    let summary = cmd_census(&run_config(&ledger, &sidecar, &dir.path().join("out"))).unwrap();
    let totals: Vec<u64> = summary.categories.iter().map(|c| c.total).collect();
    assert_eq!(totals, vec![1, 1, 1, 1]);
    let table = fs::read_to_string(dir.path().join("out/table1.csv")).unwrap();
    assert!(table.starts_with("fromIsContract,toIsContract,category,period_1,total\n"));
    assert!(dir.path().join("out/census.json").exists());
}

#[test]
fn quarter_proportions_match_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("quarters_scaled.toml", 17, dir.path());
    let (summary, _) = census_files(&[ledger], &ingest_for_sidecar(&sidecar)).unwrap();
    assert_eq!(summary.categories, sidecar.census);
    assert_eq!(summary.count(InteractionCategory::EoaEoa, 3), 1669);
    assert_eq!(summary.total, 3045 + 287 + 1036 + 119);
}

#[test]
fn synth_twice_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth("quarters_scaled.toml", 5, a.path());
    synth("quarters_scaled.toml", 5, b.path());
    for f in ["ledger.csv", "sidecar.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn zero_quota_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("zero.toml");
    fs::write(
        &spec,
        "start_ts = 0\nperiods = 1\nperiod_seconds = 3600\n[[slices]]\nmode = \"quota\"\ncategory = \"SC_SC\"\nrows = [0]\nsenders = 1\nreceivers = 1\n",
    )
    .unwrap();
    let err = cmd_synth(&spec, 1, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Scenario { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        inputs: vec![dir.path().join("nope.csv")],
        out: dir.path().join("out"),
        ..RunConfig::default()
    };
    assert_eq!(cmd_census(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn stages_off_leaves_census_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("quarters_scaled.toml", 3, dir.path());
    let cfg = RunConfig {
        stages: Stages::none(),
        ..run_config(&ledger, &sidecar, &dir.path().join("out"))
    };
    let report = cmd_analyze(&cfg).unwrap();
    assert!(report.scaling.is_none() && report.tails.is_none());
    assert!(report.stationarity.is_none() && report.taylor.is_none());
    assert_eq!(report.census.categories, sidecar.census);
    assert_eq!(report.provenance.inputs.len(), 1);
    assert_eq!(report.provenance.inputs[0].sha256.len(), 64);
    assert!(!dir.path().join("out/table2.csv").exists());
}

#[test]
fn empty_slice_has_absent_markers() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("minimal.toml", 2, dir.path());
    // a second period with no rows at all
    let mut ingest = ingest_for_sidecar(&sidecar);
    let end = *sidecar.boundaries.last().unwrap();
    let mut bounds = sidecar.boundaries.clone();
    bounds.push(end + 86_400);
    ingest.periods = PeriodSpec::Boundaries(bounds);
    let cfg = RunConfig {
        ingest,
        ..run_config(&ledger, &sidecar, &dir.path().join("out"))
    };
    let report = cmd_analyze(&cfg).unwrap();
    let scaling = report.scaling.unwrap();
    assert_eq!(scaling.len(), 8);
    let empty = scaling.iter().find(|c| c.period == 2).unwrap();
    assert!(empty.fit.is_none() && empty.reason.is_some());
    let taylor = report.taylor.unwrap();
    assert_eq!(taylor.len(), 16);
    assert!(taylor.iter().all(|c| c.fit.is_none() && c.reason.is_some()));
}

#[test]
fn report_schema_rejects_missing_fields() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("quarters_scaled.toml", 8, dir.path());
    let out = dir.path().join("out");
    cmd_analyze(&run_config(&ledger, &sidecar, &out)).unwrap();
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let report = AnalysisReport::from_json(&text).unwrap();
    assert_eq!(report.to_json().unwrap(), text);

    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["schema_version", "census", "scaling", "tails", "stationarity", "taylor", "provenance"] {
        let mut v = value.clone();
        v.as_object_mut().unwrap().remove(key);
        assert!(AnalysisReport::from_json(&v.to_string()).is_err(), "accepted report without {key}");
    }
    let mut v = value.clone();
    v["census"].as_object_mut().unwrap().remove("total");
    assert!(AnalysisReport::from_json(&v.to_string()).is_err());
    let mut v = value;
    v["schema_version"] = "tokenscale.report/0".into();
    assert!(AnalysisReport::from_json(&v.to_string()).is_err());
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("quarters_scaled.toml", 21, dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_analyze(&run_config(&ledger, &sidecar, &a)).unwrap();
    cmd_analyze(&run_config(&ledger, &sidecar, &b)).unwrap();
    let list = |d: &Path| {
        let mut v: Vec<PathBuf> = walk(d).into_iter().map(|p| p.strip_prefix(d).unwrap().to_path_buf()).collect();
        v.sort();
        v
    };
    let files = list(&a);
    assert_eq!(files, list(&b));
    assert!(files.iter().any(|f| f.starts_with("plots")));
    for f in files {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{}", f.display());
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn round_trip_recovers_generator_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let (ledger, sidecar) = synth("powerlaw_poisson.toml", 2024, dir.path());
    let out = dir.path().join("out");
    let report = cmd_analyze(&run_config(&ledger, &sidecar, &out)).unwrap();

    let scaling = report.scaling.as_ref().unwrap();
    let alpha = scaling[0].fit.unwrap().alpha;
    assert!((0.98..=1.02).contains(&alpha), "alpha {alpha}");

    let tails = report.tails.as_ref().unwrap();
    let sender = tails
        .iter()
        .find(|c| c.category == InteractionCategory::EoaEoa && c.role == Role::Sender)
        .unwrap();
    let gamma = sender.fit.as_ref().unwrap().gamma;
    assert!((2.25..=2.35).contains(&gamma), "gamma {gamma}");
    // every fresh receiver gets exactly one transfer
    let receiver = tails
        .iter()
        .find(|c| c.category == InteractionCategory::EoaEoa && c.role == Role::Receiver)
        .unwrap();
    assert!(receiver.fit.is_none());

    let taylor = report.taylor.as_ref().unwrap();
    let b = taylor
        .iter()
        .find(|c| c.category == InteractionCategory::EoaEoa && c.role == Role::Sender)
        .and_then(|c| c.fit)
        .unwrap()
        .b;
    assert!((0.95..=1.05).contains(&b), "b {b}");

    let kpss = report.stationarity.as_ref().unwrap();
    let pct = kpss
        .iter()
        .find(|c| c.category == InteractionCategory::EoaEoa && c.role == Role::Sender)
        .and_then(|c| c.summary.as_ref())
        .and_then(|s| s.percentage)
        .unwrap();
    assert!(pct >= 92.0, "stationary {pct}%");

    assert!(out.join("plots/table2_EOA_EOA_1_sender.dat").exists());
    assert!(out.join("plots/table3_EOA_EOA_1_sender.dat").exists());
    assert!(out.join("plots/table5_EOA_EOA_1_sender.dat").exists());
    for t in 1..=5 {
        assert!(out.join(format!("table{t}.csv")).exists());
    }
}
