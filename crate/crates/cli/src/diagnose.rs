//! `diagnose`: online diagnosis on a recorded trace or a live simulation.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use rectifier_fault::config::{load_scenario, scenario_to_config};
use rectifier_fault::diagnosis::{
    decision_log_csv, diagnose_trace, run_online, AggregationParams, DiagnosisConfig, DiagnosisReport,
};
use rectifier_fault::forest::Forest;
use rectifier_fault::sim::WaveformTrace;
use serde_json::json;

use crate::manifest::{beside, RunManifest};
use crate::ConfirmationArg;

/// Per-window wall-time budget in milliseconds.
const BUDGET_MS: f64 = 20.0;

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["trace", "config"])))]
pub struct DiagnoseArgs {
    /// Model JSON from `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Recorded trace CSV to replay.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Scenario config to simulate with the diagnoser in the loop; a trip
    /// forces every gate off.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of non-normal predictions a switch needs to be flagged.
    #[arg(long, default_value_t = AggregationParams::default().presence_threshold)]
    pub presence: f64,
    /// Share of non-normal predictions a window needs to trip.
    #[arg(long, default_value_t = AggregationParams::default().trip_threshold)]
    pub trip_threshold: f64,
    /// What the first trip-worthy window does.
    #[arg(long, value_enum, default_value = "when-late")]
    pub confirmation: ConfirmationArg,
    /// Decision log CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Returns whether the protection tripped.
pub fn diagnose(a: DiagnoseArgs) -> Result<bool> {
    let mut m = RunManifest::new("diagnose");
    let forest = Forest::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    m.input(&a.model);
    let defaults = DiagnosisConfig::default();
    let config = DiagnosisConfig {
        aggregation: AggregationParams { presence_threshold: a.presence, trip_threshold: a.trip_threshold },
        confirmation: a.confirmation.policy(defaults.window_len),
        ..defaults
    };
    let started = Instant::now();
    let (report, source): (DiagnosisReport, serde_json::Value) = match (&a.trace, &a.config) {
        (Some(path), _) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let trace = WaveformTrace::read_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
            m.input(path);
            (diagnose_trace(&trace, &forest, config)?, json!({ "trace": path.display().to_string() }))
        }
        (None, Some(path)) => {
            let mut scenario = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
            if let Some(seed) = a.seed {
                scenario.seed = seed;
            }
            m.config_path = Some(path.display().to_string());
            m.seed = Some(scenario.seed);
            m.input(path);
            let (report, _) = run_online(&scenario, &forest, config)?;
            (report, json!({ "scenario": scenario_to_config(&scenario) }))
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    m.time("diagnose", started.elapsed().as_secs_f64());
    fs::write(&a.out, decision_log_csv(&report.windows)).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out);

    let p = report.protection;
    let l = report.latency;
    if p.tripped {
        let when = p.trip_time.map_or_else(|| "end of input".into(), |t| format!("t = {t:.4} s"));
        println!("TRIP: fault code {} ({}) at {when}", p.final_fault_code, p.final_fault_code.name());
    } else {
        println!("no trip");
    }
    println!("{} windows, per-window time mean {:.2} ms, max {:.2} ms", l.windows, l.mean_ms, l.max_ms);
    if l.max_ms >= BUDGET_MS {
        eprintln!("warning: a window took {:.2} ms, over the {BUDGET_MS} ms budget", l.max_ms);
    }
    m.details = json!({
        "source": source,
        "config": config,
        "protection": p,
        "latency": l,
    });
    m.write(&beside(&a.out))?;
    Ok(p.tripped)
}
