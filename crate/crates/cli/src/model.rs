//! `train`, `eval` and `sweep`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use rectifier_fault::features::{Dataset, FeatureSetKind};
use rectifier_fault::forest::{
    best_counts, evaluate, sweep_csv, train_forest, EvalReport, Forest, SweepPoint, TrainConfig,
};
use rectifier_fault::par::Execution;
use rectifier_fault::FaultCode;
use serde_json::json;

use crate::data::{featurize, load_traces, split, DataError};
use crate::manifest::{beside, RunManifest};
use crate::{FeatureArg, ForestArgs, NormalizationArg};

pub const METRICS_HEADER: &str = "feature_set,n_trees,split,accuracy,train_time_s";

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Dataset::read_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn accuracy(pred: &[FaultCode], truth: &[FaultCode]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len().max(1) as f64
}

fn kind_name(kind: Option<FeatureSetKind>) -> String {
    kind.map_or_else(|| "custom".into(), |k| k.to_string())
}

fn parse_counts(list: &str) -> Result<Vec<usize>> {
    let counts: Vec<usize> = list
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| anyhow::anyhow!("bad tree count {s:?}")))
        .collect::<Result<_>>()?;
    if counts.is_empty() || counts.contains(&0) {
        anyhow::bail!("tree counts must be positive");
    }
    Ok(counts)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training CSV (`f1..fK,label`).
    #[arg(long)]
    pub data: PathBuf,
    /// Optional test CSV; adds a `test` metrics row.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Tree count, or a comma-separated list to train one forest per count.
    #[arg(long, default_value = "100")]
    pub trees: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Expected feature set; checked against the CSV's column count.
    #[arg(long, value_enum)]
    pub features: Option<FeatureArg>,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Model JSON; with several counts, the forest of the last count.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV to append rows to.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

fn check_kind(ds: &Dataset, expected: Option<FeatureArg>, path: &Path) -> Result<()> {
    if let Some(f) = expected {
        let kind: FeatureSetKind = f.into();
        if ds.n_features != kind.len() {
            return Err(DataError(format!(
                "{} has {} features but {kind} needs {}",
                path.display(),
                ds.n_features,
                kind.len()
            ))
            .into());
        }
    }
    Ok(())
}

fn append_metrics(path: &Path, rows: &str) -> Result<()> {
    let mut text = match fs::read_to_string(path) {
        Ok(t) if !t.is_empty() => t,
        _ => format!("{METRICS_HEADER}\n"),
    };
    text.push_str(rows);
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut m = RunManifest::new("train");
    m.seed = Some(a.seed);
    let train_ds = read_dataset(&a.data)?;
    check_kind(&train_ds, a.features, &a.data)?;
    m.input(&a.data);
    let test_ds = match &a.test {
        Some(p) => {
            let ds = read_dataset(p)?;
            check_kind(&ds, a.features, p)?;
            m.input(p);
            Some(ds)
        }
        None => None,
    };
    let counts = parse_counts(&a.trees)?;
    let kind = kind_name(train_ds.kind);
    let mut rows = String::new();
    let mut last = None;
    for &n in &counts {
        let cfg = TrainConfig {
            n_trees: n,
            max_depth: a.forest.max_depth,
            min_samples_leaf: a.forest.leaf,
            mtry: a.forest.mtry,
            seed: a.seed,
            ..Default::default()
        };
        let started = Instant::now();
        let forest = train_forest(&train_ds, &cfg)?;
        let secs = started.elapsed().as_secs_f64();
        m.time(&format!("train_{n}"), secs);
        let train_acc = accuracy(&forest.predict_dataset(&train_ds, Execution::default())?, &train_ds.labels);
        writeln!(rows, "{kind},{n},train,{train_acc},{secs}").unwrap();
        let oob = forest.oob_accuracy(&train_ds)?;
        writeln!(rows, "{kind},{n},oob,{},{secs}", oob.accuracy).unwrap();
        if let Some(test) = &test_ds {
            let acc = accuracy(&forest.predict_dataset(test, Execution::default())?, &test.labels);
            writeln!(rows, "{kind},{n},test,{acc},{secs}").unwrap();
        }
        last = Some((forest, cfg));
    }
    print!("{METRICS_HEADER}\n{rows}");
    let (forest, cfg) = last.expect("at least one count");
    forest.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out);
    if let Some(path) = &a.metrics {
        append_metrics(path, &rows)?;
        m.output(path);
    }
    m.details = json!({ "train_config": cfg, "tree_counts": counts, "train_rows": train_ds.len(), "metrics": rows });
    m.write(&beside(&a.out))
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model JSON; repeat together with `--data` to compare feature sets.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    /// Test CSV matching each `--model` in order.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Output directory for the reports.
    #[arg(long)]
    pub out: PathBuf,
}

/// Training time recorded in the model's manifest, if any.
fn recorded_train_time(model: &Path) -> Option<f64> {
    let m = RunManifest::read(&beside(model)).ok()?;
    m.timings.iter().filter(|(k, _)| k.starts_with("train")).map(|(_, v)| *v).last()
}

pub fn eval(a: EvalArgs) -> Result<()> {
    if a.model.len() != a.data.len() {
        anyhow::bail!("{} models but {} test sets", a.model.len(), a.data.len());
    }
    let mut m = RunManifest::new("eval");
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut columns: Vec<(String, EvalReport)> = Vec::new();
    let mut summary = Vec::new();
    for (k, (model_path, data_path)) in a.model.iter().zip(&a.data).enumerate() {
        let forest = Forest::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
        let ds = read_dataset(data_path)?;
        m.input(model_path);
        m.input(data_path);
        let started = Instant::now();
        let pred = forest.predict_dataset(&ds, Execution::default())?;
        m.time(&format!("predict_{k}"), started.elapsed().as_secs_f64());
        let report = evaluate(&ds.labels, &pred)?;
        let name = kind_name(forest.feature_set_kind);
        let label = if columns.iter().any(|(n, _)| *n == name) { format!("{name}_{k}") } else { name };
        for (suffix, text) in [("per_class.csv", report.per_class_csv()), ("confusion.csv", report.confusion_csv())] {
            let path = a.out.join(format!("{label}_{suffix}"));
            fs::write(&path, text)?;
            m.output(&path);
        }
        let train_time = recorded_train_time(model_path);
        println!("{label}: accuracy {:.4} over {} samples", report.accuracy, report.n_samples);
        summary.push(json!({
            "feature_set": label,
            "model": model_path.display().to_string(),
            "accuracy": report.accuracy,
            "n_samples": report.n_samples,
            "n_trees": forest.n_trees,
            "train_time_s": train_time,
            "report": report,
        }));
        columns.push((label, report));
    }

    // One row per class, one column per model.
    let classes: std::collections::BTreeSet<FaultCode> =
        columns.iter().flat_map(|(_, r)| r.per_class.keys().copied()).collect();
    let mut table = String::from("class,name");
    for (label, _) in &columns {
        write!(table, ",{label}").unwrap();
    }
    table.push('\n');
    for c in &classes {
        write!(table, "{c},{}", c.name()).unwrap();
        for (_, r) in &columns {
            match r.per_class.get(c) {
                Some(a) => write!(table, ",{}", a.accuracy()).unwrap(),
                None => table.push(','),
            }
        }
        table.push('\n');
    }
    table.push_str("overall,all");
    for (_, r) in &columns {
        write!(table, ",{}", r.accuracy).unwrap();
    }
    table.push('\n');
    print!("{table}");
    let table_path = a.out.join("accuracy_table.csv");
    fs::write(&table_path, &table)?;
    m.output(&table_path);
    let report_path = a.out.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    m.output(&report_path);
    m.write(&a.out.join("manifest.json"))
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Trace CSV files or directories of them; one file per scenario.
    #[arg(long, num_args = 1.., required = true)]
    pub traces: Vec<PathBuf>,
    /// Feature sets to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "original,additive,multiplicative")]
    pub features: Vec<FeatureArg>,
    #[arg(long, value_enum, default_value = "joint")]
    pub normalization: NormalizationArg,
    /// Comma-separated tree counts.
    #[arg(long, default_value = "10,25,50,100,159")]
    pub trees: String,
    /// Number of seeds; seed s drives both the scenario split and the forest.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Keep every n-th row of each scenario.
    #[arg(long, default_value_t = 197)]
    pub thin: usize,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Sweep CSV; the best-count table goes beside it as `<stem>_best.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let mut m = RunManifest::new("sweep");
    m.seed = Some(a.seed);
    let counts = parse_counts(&a.trees)?;
    let max = *counts.iter().max().unwrap();
    let started = Instant::now();
    let traces = load_traces(&a.traces)?;
    for t in &traces {
        m.input(&t.path);
    }
    m.time("load", started.elapsed().as_secs_f64());
    let mut points = Vec::new();
    for f in &a.features {
        let kind: FeatureSetKind = (*f).into();
        let ds = featurize(&traces, kind, a.normalization.into(), a.thin)?;
        for seed in a.seed..a.seed + a.seeds {
            let (train_ids, test_ids) = split(&traces, a.train_fraction, seed);
            let (train, test) = (ds.filter_groups(&train_ids), ds.filter_groups(&test_ids));
            if test.is_empty() {
                return Err(DataError("the split left no test scenarios".into()).into());
            }
            let cfg = TrainConfig {
                n_trees: max,
                max_depth: a.forest.max_depth,
                min_samples_leaf: a.forest.leaf,
                mtry: a.forest.mtry,
                seed,
                ..Default::default()
            };
            let t = Instant::now();
            let forest = train_forest(&train, &cfg)?;
            m.time(&format!("train_{kind}_seed{seed}"), t.elapsed().as_secs_f64());
            let acc = forest.accuracy_by_tree_count(&test, &counts, Execution::default())?;
            for (&n, &accuracy) in counts.iter().zip(&acc) {
                points.push(SweepPoint { feature_set: kind, n_trees: n, seed, accuracy });
            }
            eprintln!("{kind} seed {seed}: accuracy at {max} trees {:.4}", acc.last().unwrap());
        }
    }
    fs::write(&a.out, sweep_csv(&points)).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out);
    let mut best = String::from("feature_set,best_n_trees,mean_accuracy\n");
    for (kind, n, acc) in best_counts(&points) {
        writeln!(best, "{kind},{n},{acc}").unwrap();
    }
    print!("{best}");
    let stem = a.out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let best_path = a.out.with_file_name(format!("{stem}_best.csv"));
    fs::write(&best_path, &best)?;
    m.output(&best_path);
    let means: BTreeMap<String, f64> = rectifier_fault::forest::sweep_means(&points)
        .into_iter()
        .map(|((k, n), v)| (format!("{k}@{n}"), v))
        .collect();
    m.details = json!({ "tree_counts": counts, "seeds": a.seeds, "thin": a.thin, "means": means });
    m.write(&beside(&a.out))
}
