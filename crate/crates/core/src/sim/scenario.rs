//! Closed-loop scenario runs with fault injection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::circuit::{circuit_step_averaged, LegDrive, SimState};
use super::control::{controller_step, ControllerGains, Measurement};
use super::pwm::pwm_duty;
use super::trace::{PhaseSample, WaveformTrace};
use super::CircuitParams;
use crate::code::FaultCode;
use crate::error::{Error, Result};

/// Open-circuit faults: `onsets[k]` is the time switch `S(k+1)` stops
/// conducting as a transistor, or `None` if it stays healthy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultMask {
    pub onsets: [Option<f64>; 6],
}

impl FaultMask {
    pub fn healthy() -> Self {
        FaultMask::default()
    }

    /// All switches in `code` fail at `onset`.
    pub fn from_code(code: FaultCode, onset: f64) -> Self {
        let mut mask = FaultMask::default();
        for s in code.switches() {
            mask.onsets[s - 1] = Some(onset);
        }
        mask
    }

    pub fn with_fault(mut self, switch: usize, onset: f64) -> Self {
        self.onsets[switch - 1] = Some(onset);
        self
    }

    /// Switches that are open at time `t`.
    pub fn open_at(&self, t: f64) -> [bool; 6] {
        self.onsets.map(|o| o.is_some_and(|onset| t >= onset))
    }

    /// Fault code active at time `t`.
    pub fn code_at(&self, t: f64) -> FaultCode {
        self.open_at(t)
            .iter()
            .enumerate()
            .filter(|(_, &open)| open)
            .fold(FaultCode::NORMAL, |c, (k, _)| c.with_switch(k + 1))
    }

    /// Final code once every listed fault is active.
    pub fn code(&self) -> FaultCode {
        self.code_at(f64::INFINITY)
    }

    pub fn first_onset(&self) -> Option<f64> {
        self.onsets.iter().flatten().copied().reduce(f64::min)
    }
}

/// Load resistance change at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    pub time: f64,
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: CircuitParams,
    pub gains: ControllerGains,
    pub faults: FaultMask,
    pub duration: f64,
    pub seed: u64,
    /// Standard deviation of additive current-sensor noise (A).
    pub noise_std: f64,
    pub load_steps: Vec<LoadStep>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: CircuitParams::default(),
            gains: ControllerGains::default(),
            faults: FaultMask::healthy(),
            duration: 0.3,
            seed: 0,
            noise_std: 0.05,
            load_steps: Vec::new(),
        }
    }
}

impl Scenario {
    /// Minimum healthy lead-in before the first fault: five grid periods.
    pub fn min_fault_onset(&self) -> f64 {
        5.0 * self.params.grid_period()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidParams(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidParams("noise_std must be non-negative".into()));
        }
        if let Some(first) = self.faults.first_onset() {
            let min = self.min_fault_onset();
            if first < min - 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "first fault onset {first} s is earlier than the {min} s controller lead-in"
                )));
            }
        }
        for step in &self.load_steps {
            if !(step.resistance.is_finite() && step.resistance > 0.0) {
                return Err(Error::InvalidParams("load step resistance must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Observer called at every control sample. Returning `true` requests a
/// protection trip: all gates are held off from the next control step on.
pub trait StepHook {
    fn on_sample(&mut self, sample: &PhaseSample, state: &SimState) -> Result<bool>;
}

impl StepHook for () {
    fn on_sample(&mut self, _: &PhaseSample, _: &SimState) -> Result<bool> {
        Ok(false)
    }
}

impl<F: FnMut(&PhaseSample, &SimState) -> Result<bool>> StepHook for F {
    fn on_sample(&mut self, sample: &PhaseSample, state: &SimState) -> Result<bool> {
        self(sample, state)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trace: WaveformTrace,
    /// Time of the control step at which the trip took effect.
    pub trip_time: Option<f64>,
    /// Start time of the last simulation step with any gate on.
    pub last_gate_on: Option<f64>,
    pub final_state: SimState,
}

/// Runs a scenario and returns the trace sampled at the control rate.
pub fn run_scenario(scenario: &Scenario) -> Result<WaveformTrace> {
    run_scenario_with(scenario, &mut ()).map(|run| run.trace)
}

pub fn run_scenario_with<H: StepHook + ?Sized>(scenario: &Scenario, hook: &mut H) -> Result<ScenarioRun> {
    scenario.validate()?;
    let mut params = scenario.params.clone();
    let dt = params.sim_step;
    let per_control = params.steps_per_control();
    let per_switching = params.steps_per_switching();
    let total_steps = (scenario.duration / dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut load_steps = scenario.load_steps.clone();
    load_steps.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_load = 0;

    let mut state = SimState::initial(&params);
    let mut trace = WaveformTrace::new(params.control_sample_frequency);
    trace.samples.reserve(total_steps / per_control + 1);
    let mut modulating = [0.0; 3];
    let mut trip_pending = false;
    let mut trip_time = None;
    let mut last_gate_on = None;

    for k in 0..total_steps {
        let t = k as f64 * dt;
        state.time = t;
        while next_load < load_steps.len() && load_steps[next_load].time <= t {
            params.load_resistance = load_steps[next_load].resistance;
            next_load += 1;
        }

        if k % per_control == 0 {
            if trip_pending && trip_time.is_none() {
                trip_time = Some(t);
            }
            let mut sample = PhaseSample {
                t,
                ia: state.currents[0],
                ib: state.currents[1],
                ic: state.currents[2],
                vdc: state.v_dc(),
                label: Some(scenario.faults.code_at(t)),
            };
            if scenario.noise_std > 0.0 {
                sample.ia += noise.sample(&mut rng);
                sample.ib += noise.sample(&mut rng);
                sample.ic += noise.sample(&mut rng);
            }
            trace.samples.push(sample);
            if !trip_pending && hook.on_sample(&sample, &state)? {
                trip_pending = true;
            }
            let m = Measurement { time: t, currents: state.currents, v_upper: state.v_upper, v_lower: state.v_lower };
            modulating = controller_step(&mut state.controller, &m, &params, &scenario.gains);
        }

        let drives = if trip_time.is_some() {
            [LegDrive::from_gates(false, false); 3]
        } else {
            let slot = (k % per_switching) as f64;
            let duty = pwm_duty(modulating, slot / per_switching as f64, (slot + 1.0) / per_switching as f64);
            let open = scenario.faults.open_at(t);
            [0, 1, 2].map(|leg| LegDrive {
                upper_fraction: duty[leg],
                upper_enabled: !open[2 * leg],
                lower_enabled: !open[2 * leg + 1],
            })
        };
        if drives.iter().any(|d| {
            (d.upper_enabled && d.upper_fraction > 0.0) || (d.lower_enabled && d.upper_fraction < 1.0)
        }) {
            last_gate_on = Some(t);
        }
        state = circuit_step_averaged(&state, &drives, &params, dt)?;
    }

    Ok(ScenarioRun { trace, trip_time, last_gate_on, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_codes() {
        let m = FaultMask::healthy().with_fault(1, 0.1).with_fault(3, 0.15);
        assert_eq!(m.code_at(0.05), FaultCode::NORMAL);
        assert_eq!(m.code_at(0.1).to_string(), "100000");
        assert_eq!(m.code_at(0.2).to_string(), "101000");
        assert_eq!(m.code().to_string(), "101000");
        assert_eq!(m.first_onset(), Some(0.1));
    }

    #[test]
    fn rejects_early_onset() {
        let s = Scenario { faults: FaultMask::healthy().with_fault(2, 0.05), ..Default::default() };
        assert!(matches!(run_scenario(&s), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn healthy_labels_all_normal() {
        let s = Scenario { duration: 0.05, ..Default::default() };
        let trace = run_scenario(&s).unwrap();
        assert_eq!(trace.len(), 1280);
        assert!(trace.samples.iter().all(|x| x.label == Some(FaultCode::NORMAL)));
    }

    #[test]
    fn label_switches_at_onset() {
        let s = Scenario { duration: 0.12, faults: FaultMask::healthy().with_fault(1, 0.1), ..Default::default() };
        let trace = run_scenario(&s).unwrap();
        for x in &trace.samples {
            let expected = if x.t >= 0.1 { "100000" } else { "000000" };
            assert_eq!(x.label.unwrap().to_string(), expected, "t = {}", x.t);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let s = Scenario { duration: 0.03, seed: 7, ..Default::default() };
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = run_scenario(&Scenario { seed: 8, ..s }).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }
}
