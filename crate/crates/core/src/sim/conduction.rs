//! Conducting route of one rectifier leg.
//!
//! For leg current `i >= 0` (into the leg) the current leaves through the
//! upper diode or the lower transistor; for `i < 0` it arrives through the
//! upper transistor or the lower diode. An open-circuit fault removes the
//! transistor but leaves its diode in place, so a lost transistor route
//! falls back to the opposite diode, which is the only path left for that
//! current direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    UpperTransistor,
    UpperDiode,
    LowerTransistor,
    LowerDiode,
    None,
}

/// Which DC rail the leg midpoint is tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    Upper,
    Lower,
    /// No device conducts; the leg midpoint follows the source and the leg
    /// current is zero.
    Floating,
}

impl Pole {
    /// Leg midpoint potential relative to the DC midpoint.
    pub fn voltage(self, v_upper: f64, v_lower: f64, v_source: f64) -> f64 {
        match self {
            Pole::Upper => v_upper,
            Pole::Lower => -v_lower,
            Pole::Floating => v_source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConductionResult {
    pub device: Device,
    pub pole: Pole,
}

impl ConductionResult {
    pub const NONE: ConductionResult = ConductionResult { device: Device::None, pole: Pole::Floating };

    fn of(device: Device) -> Self {
        let pole = match device {
            Device::UpperTransistor | Device::UpperDiode => Pole::Upper,
            Device::LowerTransistor | Device::LowerDiode => Pole::Lower,
            Device::None => Pole::Floating,
        };
        ConductionResult { device, pole }
    }
}

/// Resolves the conducting device of a leg from its gate commands, fault
/// flags and current direction.
pub fn resolve_conduction(
    gate_upper: bool,
    gate_lower: bool,
    fault_upper: bool,
    fault_lower: bool,
    leg_current: f64,
) -> Result<ConductionResult> {
    if gate_upper && gate_lower {
        return Err(Error::ShootThrough { leg: 0 });
    }
    let upper_on = gate_upper && !fault_upper;
    let lower_on = gate_lower && !fault_lower;
    let device = if leg_current >= 0.0 {
        if lower_on {
            Device::LowerTransistor
        } else {
            Device::UpperDiode
        }
    } else if upper_on {
        Device::UpperTransistor
    } else {
        Device::LowerDiode
    };
    Ok(ConductionResult::of(device))
}
