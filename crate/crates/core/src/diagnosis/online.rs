use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::resample::Resampler;
use super::window::{aggregate, AggregationParams, WindowClassifier};
use crate::code::{FaultCode, SWITCH_COUNT};
use crate::error::Result;
use crate::features::WINDOW_LEN;
use crate::forest::Forest;
use crate::sim::{run_scenario_with, PhaseSample, Scenario, ScenarioRun, SimState, StepHook, WaveformTrace};

pub const DIAGNOSIS_RATE: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisConfig {
    pub window_len: usize,
    pub output_rate: f64,
    pub aggregation: AggregationParams,
    pub confirmation: Confirmation,
}

/// What happens on the first trip-worthy window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confirmation {
    /// Trip on that window's own decision.
    Immediate,
    /// Wait one more window and decide on both when the fault evidence
    /// starts at least `min_start` samples into the window and the previous
    /// window showed none. The onset then lies inside this window, so the
    /// decision still lands within two windows of it.
    WhenLate { min_start: usize },
    /// Always wait one more window and decide on both.
    NextWindow,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        DiagnosisConfig {
            window_len: WINDOW_LEN,
            output_rate: DIAGNOSIS_RATE,
            aggregation: AggregationParams::default(),
            confirmation: Confirmation::WhenLate { min_start: WINDOW_LEN / 10 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub window_index: usize,
    pub t_start: f64,
    pub decision_code: FaultCode,
    pub evidence: [f64; SWITCH_COUNT],
    pub wall_time_ms: f64,
    /// The protection signal was raised on this window or earlier.
    pub tripped: bool,
}

pub const DECISION_LOG_HEADER: &str = "window_index,t_start,decision_code,s1,s2,s3,s4,s5,s6,wall_time_ms,tripped";

pub fn decision_log_csv(records: &[DecisionRecord]) -> String {
    let mut out = String::from(DECISION_LOG_HEADER);
    out.push('\n');
    for r in records {
        write!(out, "{},{},{}", r.window_index, r.t_start, r.decision_code).unwrap();
        for e in r.evidence {
            write!(out, ",{e}").unwrap();
        }
        writeln!(out, ",{},{}", r.wall_time_ms, r.tripped).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtectionSignal {
    pub tripped: bool,
    /// When the gates were (or would be) forced off.
    pub trip_time: Option<f64>,
    pub final_fault_code: FaultCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub windows: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    fn from_records(records: &[DecisionRecord]) -> Self {
        let n = records.len();
        let sum: f64 = records.iter().map(|r| r.wall_time_ms).sum();
        LatencyStats {
            windows: n,
            mean_ms: if n == 0 { 0.0 } else { sum / n as f64 },
            max_ms: records.iter().map(|r| r.wall_time_ms).fold(0.0, f64::max),
        }
    }
}

impl Confirmation {
    /// Whether the first trip-worthy window `current` waits for the next
    /// one, given the window before it.
    pub fn defers(self, previous: &[FaultCode], current: &[FaultCode]) -> bool {
        match self {
            Confirmation::Immediate => false,
            Confirmation::WhenLate { min_start } => {
                evidence_start(previous).is_none() && evidence_start(current).is_some_and(|s| s >= min_start)
            }
            Confirmation::NextWindow => true,
        }
    }
}

/// Length of the run used to locate fault evidence.
pub const EVIDENCE_SPAN: usize = 20;

/// Index of the first `EVIDENCE_SPAN` predictions of which at least half
/// are non-normal, i.e. where sustained fault evidence starts. Isolated
/// non-normal predictions do not count.
pub fn evidence_start(preds: &[FaultCode]) -> Option<usize> {
    let span = EVIDENCE_SPAN.min(preds.len());
    if span == 0 {
        return None;
    }
    let need = span.div_ceil(2);
    let mut count = preds[..span].iter().filter(|p| !p.is_normal()).count();
    if count >= need {
        return Some(0);
    }
    for i in span..preds.len() {
        count += !preds[i].is_normal() as usize;
        count -= !preds[i - span].is_normal() as usize;
        if count >= need {
            return Some(i + 1 - span);
        }
    }
    None
}

/// Consumes control-rate samples one at a time, decides each complete
/// window and latches a trip.
pub struct Diagnoser<'a> {
    config: DiagnosisConfig,
    resampler: Resampler,
    classifier: WindowClassifier<'a>,
    window: Vec<PhaseSample>,
    resampled: Vec<PhaseSample>,
    window_index: usize,
    t0: Option<f64>,
    deferred: Option<Vec<FaultCode>>,
    previous: Vec<FaultCode>,
    trip: Option<FaultCode>,
    predictions: Vec<(f64, FaultCode)>,
    records: Vec<DecisionRecord>,
}

impl<'a> Diagnoser<'a> {
    pub fn new(forest: &'a Forest, input_rate: f64, config: DiagnosisConfig) -> Result<Self> {
        Ok(Diagnoser {
            config,
            resampler: Resampler::new(input_rate, config.output_rate)?,
            classifier: WindowClassifier::new(forest)?,
            window: Vec::with_capacity(config.window_len),
            resampled: Vec::new(),
            window_index: 0,
            t0: None,
            deferred: None,
            previous: Vec::new(),
            trip: None,
            predictions: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn tripped(&self) -> Option<FaultCode> {
        self.trip
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    /// Every per-sample prediction so far with its timestamp.
    pub fn predictions(&self) -> &[(f64, FaultCode)] {
        &self.predictions
    }

    /// Feeds one input sample. Returns true when this sample completed the
    /// window that raised the trip.
    pub fn push(&mut self, sample: &PhaseSample) -> Result<bool> {
        self.t0.get_or_insert(sample.t);
        self.resampled.clear();
        self.resampler.push(sample, &mut self.resampled)?;
        let mut fired = false;
        for k in 0..self.resampled.len() {
            self.window.push(self.resampled[k]);
            if self.window.len() == self.config.window_len {
                fired |= self.decide()?;
                self.window.clear();
            }
        }
        Ok(fired)
    }

    fn decide(&mut self) -> Result<bool> {
        let started = Instant::now();
        let mut preds = Vec::with_capacity(self.window.len());
        self.classifier.classify(&self.window, &mut preds)?;
        let params = &self.config.aggregation;
        let own = aggregate(&preds, params);
        let mut decision = own;
        let mut fire = false;
        if self.trip.is_none() {
            if let Some(mut prev) = self.deferred.take() {
                prev.extend_from_slice(&preds);
                decision = aggregate(&prev, params);
                fire = !decision.code.is_normal();
            } else if own.trip_worthy {
                if self.config.confirmation.defers(&self.previous, &preds) {
                    self.deferred = Some(preds.clone());
                } else {
                    fire = true;
                }
            }
        }
        if fire {
            self.trip = Some(decision.code);
        }
        let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        let t_start = self.t0.unwrap_or(0.0)
            + (self.window_index * self.config.window_len) as f64 / self.config.output_rate;
        self.predictions.extend(self.window.iter().map(|s| s.t).zip(preds.iter().copied()));
        self.previous = preds;
        self.records.push(DecisionRecord {
            window_index: self.window_index,
            t_start,
            decision_code: decision.code,
            evidence: decision.evidence,
            wall_time_ms,
            tripped: self.trip.is_some(),
        });
        self.window_index += 1;
        Ok(fire)
    }
}

impl StepHook for Diagnoser<'_> {
    fn on_sample(&mut self, sample: &PhaseSample, _: &SimState) -> Result<bool> {
        self.push(sample)
    }
}

#[derive(Debug, Clone)]
pub struct DiagnosisReport {
    pub windows: Vec<DecisionRecord>,
    pub predictions: Vec<(f64, FaultCode)>,
    pub protection: ProtectionSignal,
    pub latency: LatencyStats,
}

impl DiagnosisReport {
    fn new(d: Diagnoser<'_>, trip_time: Option<f64>) -> Self {
        let latency = LatencyStats::from_records(&d.records);
        DiagnosisReport {
            protection: ProtectionSignal {
                tripped: d.trip.is_some(),
                trip_time,
                final_fault_code: d.trip.unwrap_or(FaultCode::NORMAL),
            },
            windows: d.records,
            predictions: d.predictions,
            latency,
        }
    }

    /// Predictions of one window.
    pub fn window_predictions(&self, window: usize, window_len: usize) -> &[(f64, FaultCode)] {
        let lo = (window * window_len).min(self.predictions.len());
        let hi = (lo + window_len).min(self.predictions.len());
        &self.predictions[lo..hi]
    }

    /// Index of the window whose decision raised the trip.
    pub fn deciding_window(&self) -> Option<usize> {
        self.windows.iter().position(|r| r.tripped)
    }
}

/// Runs a scenario with the diagnoser in the loop. A trip forces every gate
/// off from the next control step on.
pub fn run_online(scenario: &Scenario, forest: &Forest, config: DiagnosisConfig) -> Result<(DiagnosisReport, ScenarioRun)> {
    let mut d = Diagnoser::new(forest, scenario.params.control_sample_frequency, config)?;
    let run = run_scenario_with(scenario, &mut d)?;
    Ok((DiagnosisReport::new(d, run.trip_time), run))
}

/// Replays a recorded trace through the diagnoser. The trip time is the
/// input sample after the deciding one.
pub fn diagnose_trace(trace: &WaveformTrace, forest: &Forest, config: DiagnosisConfig) -> Result<DiagnosisReport> {
    let mut d = Diagnoser::new(forest, trace.sample_rate, config)?;
    let mut trip_time = None;
    for s in &trace.samples {
        if d.push(s)? {
            trip_time = Some(s.t + 1.0 / trace.sample_rate);
        }
    }
    Ok(DiagnosisReport::new(d, trip_time))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(runs: &[(&str, usize)]) -> Vec<FaultCode> {
        runs.iter().flat_map(|&(c, n)| std::iter::repeat(c.parse().unwrap()).take(n)).collect()
    }

    #[test]
    fn evidence_start_skips_isolated_noise() {
        let p = codes(&[("000000", 10), ("100000", 1), ("000000", 89), ("100000", 100)]);
        assert_eq!(evidence_start(&p), Some(90));
        let p = codes(&[("100000", 200)]);
        assert_eq!(evidence_start(&p), Some(0));
        let p = codes(&[("000000", 30), ("010000", 9), ("000000", 161)]);
        assert_eq!(evidence_start(&p), None);
        // Half of a span is enough, even when interleaved.
        let p: Vec<FaultCode> = (0..200).map(|i| if i >= 50 && i % 2 == 0 { "001000" } else { "000000" }).map(|c| c.parse().unwrap()).collect();
        assert_eq!(evidence_start(&p), Some(49));
        assert_eq!(evidence_start(&[]), None);
        assert_eq!(evidence_start(&codes(&[("100000", 3)])), Some(0));
    }

    #[test]
    fn confirmation_policies() {
        let quiet = codes(&[("000000", 200)]);
        let early = codes(&[("000000", 5), ("100000", 195)]);
        let late = codes(&[("000000", 120), ("100000", 80)]);
        let policy = Confirmation::WhenLate { min_start: 20 };
        assert!(!policy.defers(&quiet, &early));
        assert!(policy.defers(&quiet, &late));
        // Evidence already in the previous window: the onset may be older
        // than this window, so waiting could overrun the budget.
        assert!(!policy.defers(&late, &late));
        assert!(policy.defers(&[], &late));
        assert!(!Confirmation::Immediate.defers(&quiet, &late));
        assert!(Confirmation::NextWindow.defers(&late, &early));
    }

    #[test]
    fn decision_log_layout() {
        let r = DecisionRecord {
            window_index: 3,
            t_start: 0.06,
            decision_code: "101000".parse().unwrap(),
            evidence: [1.0, 0.0, 0.5, 0.0, 0.0, 0.0],
            wall_time_ms: 1.5,
            tripped: true,
        };
        let csv = decision_log_csv(&[r]);
        assert_eq!(csv, format!("{DECISION_LOG_HEADER}\n3,0.06,101000,1,0,0.5,0,0,0,1.5,true\n"));
    }
}
