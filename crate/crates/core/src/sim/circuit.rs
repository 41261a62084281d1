use serde::{Deserialize, Serialize};

use super::conduction::{resolve_conduction, ConductionResult, Device, Pole};
use super::control::ControllerState;
use super::{CircuitParams, GateCommand, PHASE_OFFSETS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub time: f64,
    /// `i_a, i_b, i_c`, positive into the converter.
    pub currents: [f64; 3],
    pub v_upper: f64,
    pub v_lower: f64,
    pub controller: ControllerState,
    /// Device carrying each leg current during the last step.
    pub devices: [Device; 3],
}

impl SimState {
    /// Zero currents, DC link charged to the reference and split evenly.
    /// Steady operating point at `t = 0`: link at its reference and unity
    /// power factor currents at nominal load.
    pub fn initial(params: &CircuitParams) -> Self {
        let half = params.dc_link_voltage_ref / 2.0;
        let amp = params.nominal_current_amplitude();
        SimState {
            time: 0.0,
            currents: PHASE_OFFSETS.map(|phi| amp * phi.sin()),
            v_upper: half,
            v_lower: half,
            controller: ControllerState::warm(params),
            devices: [Device::None; 3],
        }
    }

    pub fn v_dc(&self) -> f64 {
        self.v_upper + self.v_lower
    }

    /// Energy stored in the inductors and capacitors.
    pub fn stored_energy(&self, params: &CircuitParams) -> f64 {
        let inductors: f64 = self.currents.iter().map(|i| 0.5 * params.filter_inductance * i * i).sum();
        let caps = 0.5 * params.dc_link_capacitance_per_half * (self.v_upper.powi(2) + self.v_lower.powi(2));
        inductors + caps
    }
}

pub fn source_voltages(params: &CircuitParams, time: f64) -> [f64; 3] {
    let angle = params.omega() * time;
    PHASE_OFFSETS.map(|phi| params.input_phase_voltage_amplitude * (angle + phi).sin())
}

/// Drive applied to one leg over a simulation step: the upper gate is
/// commanded for `upper_fraction` of the step and the lower gate for the
/// rest. A disabled position (faulted or tripped) never conducts as a
/// transistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegDrive {
    pub upper_fraction: f64,
    pub upper_enabled: bool,
    pub lower_enabled: bool,
}

impl LegDrive {
    /// Drive equivalent to holding the given gates for the whole step.
    pub fn from_gates(upper: bool, lower: bool) -> Self {
        LegDrive { upper_fraction: if upper { 1.0 } else { 0.0 }, upper_enabled: upper, lower_enabled: lower }
    }

    /// Step-averaged route for a current direction: pole voltage and the
    /// fractions of the step spent on the upper and lower rails.
    fn route(&self, current: f64, v_upper: f64, v_lower: f64) -> Result<AveragedRoute> {
        let f = self.upper_fraction;
        let a = resolve_conduction(self.upper_enabled, false, false, false, current)?;
        let b = resolve_conduction(false, self.lower_enabled, false, false, current)?;
        let on_upper = |r: ConductionResult| if r.pole == Pole::Upper { 1.0 } else { 0.0 };
        let upper_share = f * on_upper(a) + (1.0 - f) * on_upper(b);
        let device = if f >= 0.5 { a.device } else { b.device };
        Ok(AveragedRoute {
            pole_voltage: upper_share * v_upper - (1.0 - upper_share) * v_lower,
            upper_share,
            device,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct AveragedRoute {
    pole_voltage: f64,
    upper_share: f64,
    device: Device,
}

/// Backward-Euler update of one inductor current for a fixed pole voltage.
fn advance_current(i: f64, v_source: f64, v_pole: f64, params: &CircuitParams, dt: f64) -> f64 {
    let l = params.filter_inductance;
    let r = params.inductor_series_resistance;
    (l * i + dt * (v_source - v_pole)) / (l + dt * r)
}

/// Advances one leg, handling zero crossings. When the current reaches zero
/// it restarts in whichever direction has a route whose pole voltage drives
/// it that way; if neither does, the leg blocks and its current stays zero.
fn step_leg(
    drive: &LegDrive,
    i: f64,
    v_source: f64,
    v_upper: f64,
    v_lower: f64,
    params: &CircuitParams,
    dt: f64,
) -> Result<(f64, Option<AveragedRoute>)> {
    let advance = |from: f64, route: &AveragedRoute| advance_current(from, v_source, route.pole_voltage, params, dt);

    if i != 0.0 {
        let route = drive.route(i, v_upper, v_lower)?;
        let next = advance(i, &route);
        if next == 0.0 || next.signum() == i.signum() {
            return Ok((next, Some(route)));
        }
        // Crossed zero inside the step: restart from zero in the new direction.
        let route = drive.route(next, v_upper, v_lower)?;
        let restart = advance(0.0, &route);
        if restart != 0.0 && restart.signum() == next.signum() {
            return Ok((restart, Some(route)));
        }
        return Ok((0.0, None));
    }

    for probe in [1.0, -1.0] {
        let route = drive.route(probe, v_upper, v_lower)?;
        let next = advance(0.0, &route);
        if next != 0.0 && next.signum() == probe {
            return Ok((next, Some(route)));
        }
    }
    Ok((0.0, None))
}

/// One fixed step of the power stage with gates held for the whole step.
///
/// `gates` must already have faulted switches forced off.
pub fn circuit_step(state: &SimState, gates: &GateCommand, params: &CircuitParams, dt: f64) -> Result<SimState> {
    for leg in 0..3 {
        if gates.upper(leg) && gates.lower(leg) {
            return Err(Error::ShootThrough { leg });
        }
    }
    let drives = [0, 1, 2].map(|leg| LegDrive::from_gates(gates.upper(leg), gates.lower(leg)));
    circuit_step_averaged(state, &drives, params, dt)
}

/// One fixed step with semi-implicit Euler: inductor currents first (using
/// the present capacitor voltages), then the capacitor voltages from the
/// updated currents. Pole voltages are averaged over the step according to
/// each leg's gate duty.
pub fn circuit_step_averaged(
    state: &SimState,
    drives: &[LegDrive; 3],
    params: &CircuitParams,
    dt: f64,
) -> Result<SimState> {
    let v_src = source_voltages(params, state.time);
    let mut next = state.clone();
    let mut into_upper = 0.0;
    let mut out_of_lower = 0.0;
    for leg in 0..3 {
        let (i_next, route) =
            step_leg(&drives[leg], state.currents[leg], v_src[leg], state.v_upper, state.v_lower, params, dt)?;
        next.currents[leg] = i_next;
        match route {
            Some(route) => {
                next.devices[leg] = route.device;
                into_upper += route.upper_share * i_next;
                out_of_lower += (1.0 - route.upper_share) * i_next;
            }
            None => next.devices[leg] = Device::None,
        }
    }

    let i_load = state.v_dc() / params.load_resistance;
    let c = params.dc_link_capacitance_per_half;
    next.v_upper += dt * (into_upper - i_load) / c;
    next.v_lower += dt * (-out_of_lower - i_load) / c;
    next.time = state.time + dt;

    divergence_guard(&next, params)?;
    Ok(next)
}

fn divergence_guard(state: &SimState, params: &CircuitParams) -> Result<()> {
    let i_max = 100.0 * params.nominal_current_amplitude();
    let v_max = 100.0 * params.dc_link_voltage_ref;
    for (quantity, value, limit) in [
        ("i_a", state.currents[0], i_max),
        ("i_b", state.currents[1], i_max),
        ("i_c", state.currents[2], i_max),
        ("v_upper", state.v_upper, v_max),
        ("v_lower", state.v_lower, v_max),
    ] {
        if !value.is_finite() || value.abs() > limit {
            return Err(Error::Diverged { time: state.time, quantity, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quiescent_with_gates_off() {
        // Light load so the link stays above the source peak.
        let params = CircuitParams { load_resistance: 1e4, ..Default::default() };
        let mut s = SimState::initial(&params);
        for _ in 0..5000 {
            s = circuit_step(&s, &GateCommand::ALL_OFF, &params, params.sim_step).unwrap();
            assert_eq!(s.currents, [0.0; 3], "t = {}", s.time);
            assert!(s.devices.iter().all(|&d| d == Device::None));
        }
        // Only the load drains the capacitors.
        assert!(s.v_dc() < params.dc_link_voltage_ref);
    }

    #[test]
    fn diode_conducts_once_forward_biased() {
        // DC link discharged below the source peak: diodes rectify.
        let params = CircuitParams::default();
        let mut s = SimState::initial(&params);
        s.v_upper = 5.0;
        s.v_lower = 5.0;
        let mut conducted = false;
        for _ in 0..2000 {
            s = circuit_step(&s, &GateCommand::ALL_OFF, &params, params.sim_step).unwrap();
            conducted |= s.currents.iter().any(|&i| i != 0.0);
        }
        assert!(conducted);
    }

    #[test]
    fn lower_switch_starts_positive_current() {
        let params = CircuitParams::default();
        let s = SimState::initial(&params);
        let gates = GateCommand { gates: [false, true, false, false, false, false] };
        let s = circuit_step(&s, &gates, &params, params.sim_step).unwrap();
        assert!(s.currents[0] > 0.0);
        assert_eq!(s.devices[0], Device::LowerTransistor);
    }

    #[test]
    fn shoot_through_names_leg() {
        let params = CircuitParams::default();
        let s = SimState::initial(&params);
        let gates = GateCommand { gates: [false, false, true, true, false, false] };
        assert!(matches!(circuit_step(&s, &gates, &params, params.sim_step), Err(Error::ShootThrough { leg: 1 })));
    }

    #[test]
    fn divergence_is_reported() {
        let params = CircuitParams::default();
        let mut s = SimState::initial(&params);
        s.v_upper = 1e9;
        assert!(matches!(
            circuit_step(&s, &GateCommand::ALL_OFF, &params, params.sim_step),
            Err(Error::Diverged { .. })
        ));
    }
}
