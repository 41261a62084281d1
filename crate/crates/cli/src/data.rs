//! `simulate` and `gen-dataset`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rectifier_fault::config::{load_scenario, scenario_to_config};
use rectifier_fault::diagnosis::{resample, DIAGNOSIS_RATE};
use rectifier_fault::features::{
    assemble_dataset, plan_runs, split_by_scenario, Dataset, FeatureSetKind, GenerationPlan, NormalizationMode,
    RunCounts, WINDOW_LEN,
};
use rectifier_fault::par::{self, Execution};
use rectifier_fault::sim::{run_scenario, Scenario, WaveformTrace};
use rectifier_fault::FaultCode;
use serde_json::json;

use crate::manifest::{beside, RunManifest};
use crate::{FeatureArg, NormalizationArg};

/// Problems with input data that are not parse errors, such as a class
/// with no scenario.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanArg {
    /// Every catalog class (normal, singles, doubles, multi-faults).
    Catalog,
    /// Normal, the single faults and the localized double faults, in short
    /// runs around the onset; the online-diagnosis training recipe.
    Diagnosis,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario config file (`key = value` lines); defaults apply without it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed, or seeds the plan.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulate a batch plan instead of one scenario; `--out` is then a
    /// directory. The config, if given, is the base scenario.
    #[arg(long, value_enum)]
    pub plan: Option<PlanArg>,
    /// Runs per class for the catalog plan.
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Runs of the normal class for the diagnosis plan.
    #[arg(long, default_value_t = RunCounts::default().normal)]
    pub normal_runs: usize,
    /// Runs per single fault for the diagnosis plan.
    #[arg(long, default_value_t = RunCounts::default().single)]
    pub single_runs: usize,
    /// Runs per double fault for the diagnosis plan.
    #[arg(long, default_value_t = RunCounts::default().double)]
    pub double_runs: usize,
    /// Trace CSV, or the output directory with `--plan`.
    #[arg(long)]
    pub out: PathBuf,
}

fn write_trace(path: &Path, trace: &WaveformTrace) -> Result<()> {
    fs::write(path, trace.to_csv_string()).with_context(|| format!("writing {}", path.display()))
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut m = RunManifest::new("simulate");
    let mut scenario = match &a.config {
        Some(path) => {
            m.config_path = Some(path.display().to_string());
            m.input(path);
            load_scenario(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => Scenario::default(),
    };
    let started = Instant::now();
    let Some(plan_kind) = a.plan else {
        if let Some(seed) = a.seed {
            scenario.seed = seed;
        }
        m.seed = Some(scenario.seed);
        let trace = run_scenario(&scenario)?;
        write_trace(&a.out, &trace)?;
        m.time("simulate", started.elapsed().as_secs_f64());
        m.output(&a.out);
        m.details = json!({ "scenario": scenario_to_config(&scenario), "samples": trace.len() });
        println!("wrote {} samples to {}", trace.len(), a.out.display());
        return m.write(&beside(&a.out));
    };

    let seed = a.seed.unwrap_or(scenario.seed);
    m.seed = Some(seed);
    let plan = match plan_kind {
        PlanArg::Catalog => {
            if a.config.is_none() {
                scenario.duration = 2.0;
            }
            GenerationPlan::catalog(scenario, a.runs, seed)
        }
        PlanArg::Diagnosis => {
            let counts = RunCounts { normal: a.normal_runs, single: a.single_runs, double: a.double_runs };
            let mut plan = GenerationPlan::diagnosis(counts, seed);
            if a.config.is_some() {
                let duration = plan.base.duration;
                plan.base = Scenario { duration, ..scenario };
            }
            plan
        }
    };
    let runs = plan_runs(&plan);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let names: Vec<String> = runs.iter().map(|r| format!("run_{:04}_{}.csv", r.id, r.code)).collect();
    par::try_map_range(Execution::default(), runs.len(), |i| -> Result<()> {
        let trace = run_scenario(&runs[i].scenario)?;
        write_trace(&a.out.join(&names[i]), &trace)
    })?;
    m.time("simulate", started.elapsed().as_secs_f64());
    for n in &names {
        m.output(&a.out.join(n));
    }
    let listing: Vec<_> = runs
        .iter()
        .zip(&names)
        .map(|(r, n)| json!({ "file": n, "code": r.code.to_string(), "scenario": scenario_to_config(&r.scenario) }))
        .collect();
    m.details = json!({ "plan": format!("{plan_kind:?}").to_lowercase(), "runs": listing });
    println!("wrote {} traces to {}", runs.len(), a.out.display());
    m.write(&a.out.join("manifest.json"))
}

/// A trace file with the class of its scenario: the last sample's label.
pub struct LoadedTrace {
    pub path: PathBuf,
    pub code: FaultCode,
    pub trace: WaveformTrace,
}

/// Expands directories into their `.csv` files (sorted) and keeps files
/// as given.
pub fn trace_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(DataError("no trace files found".into()).into());
    }
    Ok(files)
}

/// Reads traces and resamples them to the diagnosis rate.
pub fn load_traces(paths: &[PathBuf]) -> Result<Vec<LoadedTrace>> {
    let files = trace_files(paths)?;
    par::try_map_range(Execution::default(), files.len(), |i| -> Result<LoadedTrace> {
        let path = &files[i];
        let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let raw = WaveformTrace::read_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
        let code = raw
            .samples
            .last()
            .and_then(|s| s.label)
            .ok_or_else(|| DataError(format!("{} has no labeled samples", path.display())))?;
        let trace = resample(&raw, DIAGNOSIS_RATE).with_context(|| format!("resampling {}", path.display()))?;
        Ok(LoadedTrace { path: path.clone(), code, trace })
    })
}

/// Feature rows for each trace, grouped by trace index, thinned per run.
pub fn featurize(traces: &[LoadedTrace], kind: FeatureSetKind, mode: NormalizationMode, thin: usize) -> Result<Dataset> {
    let parts = par::try_map_range(Execution::default(), traces.len(), |i| {
        assemble_dataset(&traces[i].trace, kind, mode, WINDOW_LEN).map(|d| d.thin(thin).with_group(i as u32))
    })?;
    let mut ds = Dataset::new(kind.len(), Some(kind));
    ds.normalization = Some(mode);
    for p in &parts {
        ds.extend(p)?;
    }
    Ok(ds)
}

/// Checks that every required class has at least one scenario.
pub fn require_classes(traces: &[LoadedTrace], required: &[FaultCode]) -> Result<()> {
    let present: BTreeSet<FaultCode> = traces.iter().map(|t| t.code).collect();
    let missing: Vec<String> = required.iter().filter(|c| !present.contains(c)).map(|c| format!("{c} ({})", c.name())).collect();
    if !missing.is_empty() {
        return Err(DataError(format!("no scenario for class(es): {}", missing.join(", "))).into());
    }
    Ok(())
}

pub fn parse_codes(list: &str) -> Result<Vec<FaultCode>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<FaultCode>().map_err(|e| anyhow::Error::new(DataError(format!("bad class {s:?}: {e}")))))
        .collect()
}

/// Scenario-level split. Returns (train ids, test ids).
pub fn split(traces: &[LoadedTrace], train_fraction: f64, seed: u64) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let ids: Vec<(u32, FaultCode)> = traces.iter().enumerate().map(|(i, t)| (i as u32, t.code)).collect();
    split_by_scenario(&ids, train_fraction, seed)
}

#[derive(Args, Debug)]
pub struct GenDatasetArgs {
    /// Trace CSV files or directories of them; one file per scenario.
    #[arg(long, num_args = 1.., required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "multiplicative")]
    pub features: FeatureArg,
    #[arg(long, value_enum, default_value = "joint")]
    pub normalization: NormalizationArg,
    /// Share of each class's scenarios that goes to training.
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep every n-th row of each scenario.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Comma-separated codes that must be present, e.g. 000000,100000.
    #[arg(long)]
    pub classes: Option<String>,
    /// Output directory for train.csv and test.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_dataset(a: GenDatasetArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.train_fraction) {
        return Err(DataError(format!("train fraction {} outside [0, 1]", a.train_fraction)).into());
    }
    let mut m = RunManifest::new("gen-dataset");
    m.seed = Some(a.seed);
    let started = Instant::now();
    let traces = load_traces(&a.traces)?;
    for t in &traces {
        m.input(&t.path);
    }
    if let Some(list) = &a.classes {
        require_classes(&traces, &parse_codes(list)?)?;
    }
    let kind: FeatureSetKind = a.features.into();
    let ds = featurize(&traces, kind, a.normalization.into(), a.thin)?;
    let (train_ids, test_ids) = split(&traces, a.train_fraction, a.seed);
    let train = ds.filter_groups(&train_ids);
    let test = ds.filter_groups(&test_ids);
    m.time("generate", started.elapsed().as_secs_f64());

    let mut scenarios: BTreeMap<FaultCode, [usize; 2]> = BTreeMap::new();
    for (i, t) in traces.iter().enumerate() {
        scenarios.entry(t.code).or_default()[!train_ids.contains(&(i as u32)) as usize] += 1;
    }
    let (train_rows, test_rows) = (train.class_counts(), test.class_counts());
    println!("class   name        scenarios(train/test)  rows(train/test)");
    for (code, [n_train, n_test]) in &scenarios {
        println!(
            "{code}  {:<10}  {n_train:>5} / {n_test:<5}            {} / {}",
            code.name(),
            train_rows.get(code).unwrap_or(&0),
            test_rows.get(code).unwrap_or(&0)
        );
        if *n_test == 0 && a.train_fraction < 1.0 {
            eprintln!("warning: class {code} ({}) has no test scenario", code.name());
        }
    }

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (train_path, test_path) = (a.out.join("train.csv"), a.out.join("test.csv"));
    fs::write(&train_path, train.to_csv_string())?;
    fs::write(&test_path, test.to_csv_string())?;
    m.output(&train_path);
    m.output(&test_path);
    let counts: BTreeMap<String, [usize; 2]> = scenarios.iter().map(|(c, n)| (c.to_string(), *n)).collect();
    m.details = json!({
        "features": kind.to_string(),
        "normalization": format!("{:?}", NormalizationMode::from(a.normalization)),
        "train_fraction": a.train_fraction,
        "thin": a.thin,
        "scenarios_train_test": counts,
        "train_rows": train.len(),
        "test_rows": test.len(),
    });
    m.write(&a.out.join("manifest.json"))
}
