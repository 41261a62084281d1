use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{assemble_dataset, Dataset};
use super::normalize::NormalizationMode;
use super::synth::FeatureSetKind;
use super::WINDOW_LEN;
use crate::code::FaultCode;
use crate::diagnosis::{resample, DIAGNOSIS_RATE};
use crate::error::Result;
use crate::par::{self, Execution};
use crate::sim::{run_scenario, FaultMask, Scenario, WaveformTrace};

/// Normal operation, all single faults, nine double faults and three
/// multi-switch faults.
pub fn fault_catalog() -> Vec<FaultCode> {
    let mut codes = vec![FaultCode::NORMAL];
    codes.extend((1..=6).map(|s| FaultCode::from_switches(&[s])));
    codes.extend(DOUBLE_FAULTS.iter().map(|p| FaultCode::from_switches(p)));
    codes.extend(MULTI_FAULTS.iter().map(|m| FaultCode::from_switches(m)));
    codes
}

/// The first `LOCALIZED_DOUBLES` pairs are the ones the diagnosis recipe
/// trains and is checked on.
pub const DOUBLE_FAULTS: [[usize; 2]; 9] =
    [[1, 2], [1, 3], [1, 4], [1, 5], [2, 3], [3, 4], [5, 6], [2, 6], [4, 6]];

pub const LOCALIZED_DOUBLES: usize = 5;

pub const MULTI_FAULTS: [&[usize]; 3] = [&[1, 2, 3, 4], &[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5, 6]];

/// How to draw a batch of labeled scenario runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub base: Scenario,
    /// Classes and how many runs each gets.
    pub classes: Vec<(FaultCode, usize)>,
    /// Fault onsets are drawn uniformly from `[onset_min, onset_max)`.
    pub onset_min: f64,
    pub onset_max: f64,
    pub seed: u64,
}

impl GenerationPlan {
    /// `runs` runs for every catalog class, onsets spread over one grid
    /// period after the controller lead-in.
    pub fn catalog(base: Scenario, runs: usize, seed: u64) -> Self {
        let lead = base.min_fault_onset();
        let period = base.params.grid_period();
        GenerationPlan {
            classes: fault_catalog().into_iter().map(|c| (c, runs)).collect(),
            onset_min: lead,
            onset_max: lead + period,
            base,
            seed,
        }
    }
}

/// Runs per class group for [`GenerationPlan::diagnosis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub normal: usize,
    pub single: usize,
    pub double: usize,
}

impl Default for RunCounts {
    fn default() -> Self {
        RunCounts { normal: 16, single: 24, double: 8 }
    }
}

impl GenerationPlan {
    /// Normal operation, the six single faults and the localized double
    /// faults. Runs last 60 ms past the lead-in so each holds the onset
    /// window and two to three faulted windows.
    pub fn diagnosis(counts: RunCounts, seed: u64) -> Self {
        let mut base = Scenario::default();
        base.duration = base.min_fault_onset() + 3.0 * base.params.grid_period();
        let mut plan = GenerationPlan::catalog(base, 0, seed);
        plan.classes = fault_catalog()
            .into_iter()
            .filter_map(|c| {
                let n = match c.switches().len() {
                    0 => counts.normal,
                    1 => counts.single,
                    2 if DOUBLE_FAULTS[..LOCALIZED_DOUBLES].iter().any(|p| FaultCode::from_switches(p) == c) => {
                        counts.double
                    }
                    _ => return None,
                };
                Some((c, n))
            })
            .collect();
        plan
    }
}

/// One planned simulation with its run id and target class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedRun {
    pub id: u32,
    pub code: FaultCode,
    pub scenario: Scenario,
}

/// Expands a plan into concrete scenarios. Seeds and onsets come from the
/// plan seed, so the same plan always gives the same runs.
pub fn plan_runs(plan: &GenerationPlan) -> Vec<PlannedRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut runs = Vec::new();
    for &(code, n) in &plan.classes {
        for _ in 0..n {
            let mut scenario = plan.base.clone();
            scenario.seed = rng.gen();
            let onset = if plan.onset_max > plan.onset_min {
                rng.gen_range(plan.onset_min..plan.onset_max)
            } else {
                plan.onset_min
            };
            scenario.faults =
                if code.is_normal() { FaultMask::healthy() } else { FaultMask::from_code(code, onset) };
            runs.push(PlannedRun { id: runs.len() as u32, code, scenario });
        }
    }
    runs
}

/// Simulates every run and resamples its trace to the diagnosis rate.
pub fn simulate_runs(runs: &[PlannedRun], exec: Execution) -> Result<Vec<WaveformTrace>> {
    par::try_map_range(exec, runs.len(), |i| resample(&run_scenario(&runs[i].scenario)?, DIAGNOSIS_RATE))
}

/// Feature rows for every run, grouped by run id.
pub fn assemble_runs(
    runs: &[PlannedRun],
    traces: &[WaveformTrace],
    kind: FeatureSetKind,
    mode: NormalizationMode,
) -> Result<Dataset> {
    let mut ds = Dataset::new(kind.len(), Some(kind));
    ds.normalization = Some(mode);
    for (run, trace) in runs.iter().zip(traces) {
        ds.extend(&assemble_dataset(trace, kind, mode, WINDOW_LEN)?.with_group(run.id))?;
    }
    Ok(ds)
}
