//! Windowed online diagnosis: resample the control-rate stream, classify
//! every sample, decide each window and latch a protection trip.

mod online;
mod resample;
mod window;

pub use online::{
    decision_log_csv, diagnose_trace, evidence_start, run_online, Confirmation, DecisionRecord, DiagnosisConfig, DiagnosisReport, Diagnoser,
    LatencyStats, ProtectionSignal, DECISION_LOG_HEADER, DIAGNOSIS_RATE,
};
pub use resample::{resample, Resampler};
pub use window::{aggregate, aggregate_window, classify_stream, AggregationParams, WindowClassifier, WindowDecision};
