//! Dual-loop control: a PI voltage loop sets the current amplitude and
//! per-phase proportional-resonant regulators track sinusoidal references in
//! phase with the source voltages.

use serde::{Deserialize, Serialize};

use super::{CircuitParams, PHASE_OFFSETS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Voltage loop proportional gain (A/V).
    pub voltage_kp: f64,
    /// Voltage loop integral gain (A/(V s)).
    pub voltage_ki: f64,
    /// Current regulator proportional gain (V/A).
    pub current_kp: f64,
    /// Resonant gain at the grid frequency (V/A).
    pub current_kr: f64,
    /// Resonator damping bandwidth (rad/s).
    pub resonant_bandwidth: f64,
    /// Zero-sequence current per volt of capacitor imbalance (A/V).
    pub balance_gain: f64,
    /// Clamp on the current amplitude reference (A).
    pub current_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            voltage_kp: 0.6,
            voltage_ki: 15.0,
            current_kp: 3.0,
            current_kr: 60.0,
            resonant_bandwidth: 5.0,
            balance_gain: 0.2,
            current_limit: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    pub voltage_integral: f64,
    /// Resonator states `(integral, derivative)` per phase.
    pub resonators: [[f64; 2]; 3],
}

impl ControllerState {
    /// Integrator pre-loaded with the amplitude that supplies the nominal
    /// load, so a healthy run starts close to steady state.
    pub fn warm(params: &CircuitParams) -> Self {
        ControllerState { voltage_integral: params.nominal_current_amplitude(), ..Default::default() }
    }
}

/// Inputs seen by the controller at one sampling instant.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub time: f64,
    pub currents: [f64; 3],
    pub v_upper: f64,
    pub v_lower: f64,
}

/// One control update at the sampling rate. Returns modulating signals in
/// `[-1, 1]`.
pub fn controller_step(
    ctrl: &mut ControllerState,
    m: &Measurement,
    params: &CircuitParams,
    gains: &ControllerGains,
) -> [f64; 3] {
    let dt = 1.0 / params.control_sample_frequency;
    let v_dc = m.v_upper + m.v_lower;

    let v_err = params.dc_link_voltage_ref - v_dc;
    let limit = gains.current_limit;
    ctrl.voltage_integral = (ctrl.voltage_integral + gains.voltage_ki * v_err * dt).clamp(-limit, limit);
    let amplitude = (gains.voltage_kp * v_err + ctrl.voltage_integral).clamp(-limit, limit);
    let balance = -gains.balance_gain * (m.v_upper - m.v_lower);

    let w0 = params.omega();
    let wc = gains.resonant_bandwidth;
    let half_dc = (v_dc / 2.0).max(1e-6);
    let mut out = [0.0; 3];
    for leg in 0..3 {
        let angle = w0 * m.time + PHASE_OFFSETS[leg];
        let v_source = params.input_phase_voltage_amplitude * angle.sin();
        let reference = amplitude * angle.sin() + balance;
        let err = reference - m.currents[leg];

        let [x1, x2] = ctrl.resonators[leg];
        let v_cmd = v_source - gains.current_kp * err - gains.current_kr * x2;
        let raw = v_cmd / half_dc;
        out[leg] = raw.clamp(-1.0, 1.0);

        // Conditional integration: hold the resonator while the leg is
        // saturated.
        if raw.abs() <= 1.0 {
            let x2_next = x2 + dt * (-w0 * w0 * x1 - 2.0 * wc * x2 + 2.0 * wc * err);
            let x1_next = x1 + dt * x2_next;
            ctrl.resonators[leg] = [x1_next, x2_next];
        }
    }
    out
}
