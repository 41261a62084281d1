//! Fixed-step simulation of the three-phase four-wire PWM rectifier.
//!
//! Each phase leg is an ideal half-bridge (IGBT plus anti-parallel diode per
//! position) tied through a filter inductor to its source. The fourth wire
//! returns to the midpoint of a split DC-link capacitor, so every leg sees
//! its own source voltage against `+v_upper` or `-v_lower`.
//!
//! Phase currents are positive when flowing from the source into the leg.

mod circuit;
mod conduction;
mod control;
mod params;
mod pwm;
mod scenario;
mod trace;

pub use circuit::{circuit_step, circuit_step_averaged, source_voltages, LegDrive, SimState};
pub use conduction::{resolve_conduction, ConductionResult, Device, Pole};
pub use control::{controller_step, ControllerGains, ControllerState, Measurement};
pub use params::CircuitParams;
pub use pwm::{carrier, pwm_duty, pwm_modulate, GateCommand};
pub use scenario::{run_scenario, run_scenario_with, FaultMask, LoadStep, Scenario, ScenarioRun, StepHook};
pub use trace::{PhaseSample, WaveformTrace};

/// Phase offsets of the source voltages (radians), phases a, b, c.
pub const PHASE_OFFSETS: [f64; 3] = [
    0.0,
    -2.0 * std::f64::consts::PI / 3.0,
    2.0 * std::f64::consts::PI / 3.0,
];
