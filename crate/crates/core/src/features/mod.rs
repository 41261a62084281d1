//! Window normalization, synthetic feature expansion and labeled datasets.

mod dataset;
mod generate;
mod normalize;
mod synth;

pub use dataset::{assemble_dataset, split_by_scenario, Dataset};
pub use generate::{
    assemble_runs, fault_catalog, plan_runs, simulate_runs, GenerationPlan, PlannedRun, RunCounts, DOUBLE_FAULTS,
    LOCALIZED_DOUBLES, MULTI_FAULTS,
};
pub use normalize::{normalize, normalize_window, NormalizationMode, TARGET_MAX, TARGET_MIN};
pub use synth::{guarded_ratio, synthesize, synthesize_into, FeatureSetKind, FeatureVector, RATIO_EPSILON};

/// Samples per diagnosis window (20 ms at 10 kHz).
pub const WINDOW_LEN: usize = 200;
