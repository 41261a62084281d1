//! Sequential against data-parallel execution for the hot paths: forest
//! training, batch prediction, ensemble error reports and scenario batches.
//!
//! Built without the `parallel` feature both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rectifier_fault::features::{
    assemble_runs, plan_runs, simulate_runs, Dataset, FeatureSetKind, GenerationPlan, NormalizationMode, RunCounts,
};
use rectifier_fault::forest::{ensemble_error_report, train_forest_with, TrainConfig};
use rectifier_fault::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn small_plan() -> GenerationPlan {
    GenerationPlan::diagnosis(RunCounts { normal: 2, single: 1, double: 1 }, 7)
}

fn dataset() -> Dataset {
    let runs = plan_runs(&small_plan());
    let traces = simulate_runs(&runs, Execution::Parallel).unwrap();
    assemble_runs(&runs, &traces, FeatureSetKind::Multiplicative, NormalizationMode::Joint).unwrap().thin(8)
}

fn bench_training(c: &mut Criterion) {
    let ds = dataset();
    let cfg = TrainConfig { n_trees: 32, min_samples_leaf: 20, seed: 1, ..Default::default() };
    let mut g = c.benchmark_group("train_forest");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| train_forest_with(&ds, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_prediction(c: &mut Criterion) {
    let ds = dataset();
    let cfg = TrainConfig { n_trees: 64, min_samples_leaf: 20, seed: 2, ..Default::default() };
    let forest = train_forest_with(&ds, &cfg, Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("predict_dataset");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| forest.predict_dataset(&ds, exec).unwrap())
        });
    }
    g.finish();

    let eval = ds.thin(4);
    let mut g = c.benchmark_group("ensemble_error_report");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ensemble_error_report(&forest, &eval, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_scenarios(c: &mut Criterion) {
    let runs = plan_runs(&small_plan());
    let mut g = c.benchmark_group("simulate_runs");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate_runs(&runs, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_training, bench_prediction, bench_scenarios);
criterion_main!(benches);
