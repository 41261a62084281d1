use serde::{Deserialize, Serialize};

use crate::code::{FaultCode, SWITCH_COUNT};
use crate::error::{Error, Result};
use crate::features::{normalize_window, synthesize_into, FeatureSetKind, NormalizationMode};
use crate::forest::Forest;
use crate::par::{self, Execution};
use crate::sim::{PhaseSample, WaveformTrace};

/// Thresholds that turn a window of per-sample predictions into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    /// A bit is set when at least this fraction of the non-normal
    /// predictions carry it.
    pub presence_threshold: f64,
    /// A window can trip only when at least this fraction of all its
    /// predictions is non-normal.
    pub trip_threshold: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        AggregationParams { presence_threshold: 0.35, trip_threshold: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowDecision {
    pub code: FaultCode,
    /// Per switch S1..S6, the fraction of non-normal predictions with that
    /// bit set.
    pub evidence: [f64; SWITCH_COUNT],
    /// Fraction of all predictions that are non-normal.
    pub non_normal_fraction: f64,
    /// Non-normal share reached the trip threshold and the code is a fault.
    pub trip_worthy: bool,
}

/// Aggregates one complete window of `window_len` predictions.
pub fn aggregate_window(predictions: &[FaultCode], window_len: usize, params: &AggregationParams) -> Result<WindowDecision> {
    if predictions.len() != window_len {
        return Err(Error::IncompleteWindow { expected: window_len, got: predictions.len() });
    }
    Ok(aggregate(predictions, params))
}

/// Aggregates any non-empty run of predictions with the window rule.
pub fn aggregate(predictions: &[FaultCode], params: &AggregationParams) -> WindowDecision {
    let mut bit_counts = [0usize; SWITCH_COUNT];
    let mut non_normal = 0usize;
    for p in predictions.iter().filter(|p| !p.is_normal()) {
        non_normal += 1;
        for s in p.switches() {
            bit_counts[s - 1] += 1;
        }
    }
    let evidence = bit_counts.map(|c| if non_normal == 0 { 0.0 } else { c as f64 / non_normal as f64 });
    let mut code = FaultCode::NORMAL;
    for (k, &e) in evidence.iter().enumerate() {
        if non_normal > 0 && e >= params.presence_threshold {
            code = code.with_switch(k + 1);
        }
    }
    let non_normal_fraction =
        if predictions.is_empty() { 0.0 } else { non_normal as f64 / predictions.len() as f64 };
    WindowDecision {
        code,
        evidence,
        non_normal_fraction,
        trip_worthy: !code.is_normal() && non_normal_fraction >= params.trip_threshold,
    }
}

/// Normalizes, synthesizes and classifies one window of samples.
#[derive(Debug)]
pub struct WindowClassifier<'a> {
    forest: &'a Forest,
    kind: FeatureSetKind,
    mode: NormalizationMode,
    rows: Vec<[f64; 3]>,
    buf: Vec<f64>,
    votes: Vec<u32>,
}

impl<'a> WindowClassifier<'a> {
    pub fn new(forest: &'a Forest) -> Result<Self> {
        let kind = forest
            .feature_set_kind
            .ok_or_else(|| Error::Data("model does not record its feature set".into()))?;
        if kind.len() != forest.n_features {
            return Err(Error::FeatureLength { expected: forest.n_features, got: kind.len() });
        }
        Ok(WindowClassifier {
            forest,
            kind,
            mode: forest.normalization.unwrap_or_default(),
            rows: Vec::new(),
            buf: Vec::new(),
            votes: vec![0; forest.n_classes()],
        })
    }

    pub fn kind(&self) -> FeatureSetKind {
        self.kind
    }

    pub fn classify(&mut self, window: &[PhaseSample], out: &mut Vec<FaultCode>) -> Result<()> {
        if window.is_empty() {
            return Ok(());
        }
        self.rows.clear();
        self.rows.extend(window.iter().map(PhaseSample::currents));
        for n in normalize_window(&self.rows, self.mode)? {
            self.buf.clear();
            synthesize_into(n[0], n[1], n[2], self.kind, &mut self.buf);
            self.forest.vote_into(&self.buf, &mut self.votes)?;
            out.push(self.forest.label_vocab[crate::forest::majority_index(&self.votes)]);
        }
        Ok(())
    }
}

/// Per-sample predictions for a stream already at the diagnosis rate.
/// Each window of `window_len` samples (the last may be shorter) is
/// normalized on its own, so a prediction never uses later windows.
pub fn classify_stream(trace: &WaveformTrace, forest: &Forest, window_len: usize, exec: Execution) -> Result<Vec<FaultCode>> {
    WindowClassifier::new(forest)?;
    let chunks: Vec<&[PhaseSample]> = trace.samples.chunks(window_len.max(1)).collect();
    let per_window = par::try_map_range(exec, chunks.len(), |w| {
        let mut c = WindowClassifier::new(forest)?;
        let mut out = Vec::with_capacity(chunks[w].len());
        c.classify(chunks[w], &mut out)?;
        Ok::<_, Error>(out)
    })?;
    Ok(per_window.into_iter().flatten().collect())
}
