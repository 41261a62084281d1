use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and timing parameters of the rectifier.
///
/// Defaults follow the experimental rig: 40 V phase amplitude, 100 V DC
/// link, 500 uH filter, 7000 uF per capacitor half, 16 ohm load, 50 Hz grid,
/// 12.8 kHz switching and 25.6 kHz control sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub input_phase_voltage_amplitude: f64,
    pub dc_link_voltage_ref: f64,
    pub filter_inductance: f64,
    pub inductor_series_resistance: f64,
    pub dc_link_capacitance_per_half: f64,
    pub load_resistance: f64,
    pub grid_frequency: f64,
    pub switching_frequency: f64,
    pub control_sample_frequency: f64,
    pub sim_step: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        let switching_frequency = 12_800.0;
        CircuitParams {
            input_phase_voltage_amplitude: 40.0,
            dc_link_voltage_ref: 100.0,
            filter_inductance: 500e-6,
            inductor_series_resistance: 0.1,
            dc_link_capacitance_per_half: 7000e-6,
            load_resistance: 16.0,
            grid_frequency: 50.0,
            switching_frequency,
            control_sample_frequency: 25_600.0,
            sim_step: 1.0 / (20.0 * switching_frequency),
        }
    }
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let r = num / den;
    let rounded = r.round();
    (rounded >= 1.0 && (r - rounded).abs() < 1e-6).then_some(rounded as usize)
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_phase_voltage_amplitude", self.input_phase_voltage_amplitude),
            ("dc_link_voltage_ref", self.dc_link_voltage_ref),
            ("filter_inductance", self.filter_inductance),
            ("inductor_series_resistance", self.inductor_series_resistance),
            ("dc_link_capacitance_per_half", self.dc_link_capacitance_per_half),
            ("load_resistance", self.load_resistance),
            ("grid_frequency", self.grid_frequency),
            ("switching_frequency", self.switching_frequency),
            ("control_sample_frequency", self.control_sample_frequency),
            ("sim_step", self.sim_step),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if integer_ratio(self.control_sample_frequency, self.switching_frequency).is_none() {
            return Err(Error::InvalidParams(
                "control_sample_frequency must be an integer multiple of switching_frequency".into(),
            ));
        }
        if integer_ratio(1.0 / self.switching_frequency, self.sim_step).is_none()
            || integer_ratio(1.0 / self.control_sample_frequency, self.sim_step).is_none()
        {
            return Err(Error::InvalidParams(
                "sim_step must divide the switching and control sampling periods".into(),
            ));
        }
        Ok(())
    }

    /// Simulation steps per control sample.
    pub fn steps_per_control(&self) -> usize {
        integer_ratio(1.0 / self.control_sample_frequency, self.sim_step)
            .expect("validated parameters")
    }

    pub fn steps_per_switching(&self) -> usize {
        integer_ratio(1.0 / self.switching_frequency, self.sim_step).expect("validated parameters")
    }

    pub fn grid_period(&self) -> f64 {
        1.0 / self.grid_frequency
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.grid_frequency
    }

    /// Load power at the reference voltage.
    pub fn nominal_power(&self) -> f64 {
        self.dc_link_voltage_ref * self.dc_link_voltage_ref / self.load_resistance
    }

    /// Peak phase current that delivers the nominal load power at unity
    /// power factor.
    pub fn nominal_current_amplitude(&self) -> f64 {
        2.0 * self.nominal_power() / (3.0 * self.input_phase_voltage_amplitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = CircuitParams::default();
        p.validate().unwrap();
        assert_eq!(p.steps_per_switching(), 20);
        assert_eq!(p.steps_per_control(), 10);
    }

    #[test]
    fn rejects_non_positive() {
        let p = CircuitParams { load_resistance: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = CircuitParams { filter_inductance: f64::NAN, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_non_dividing_step() {
        let p = CircuitParams { sim_step: 3e-6, ..Default::default() };
        assert!(p.validate().is_err());
        let p = CircuitParams { control_sample_frequency: 20_000.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
