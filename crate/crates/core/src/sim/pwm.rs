//! Sinusoidal PWM against a symmetric triangle carrier.

use serde::{Deserialize, Serialize};

/// Gate commands for S1..S6; `(S1, S2)` is phase a upper/lower, `(S3, S4)`
/// phase b and `(S5, S6)` phase c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateCommand {
    pub gates: [bool; 6],
}

impl GateCommand {
    pub const ALL_OFF: GateCommand = GateCommand { gates: [false; 6] };

    pub fn upper(&self, leg: usize) -> bool {
        self.gates[2 * leg]
    }

    pub fn lower(&self, leg: usize) -> bool {
        self.gates[2 * leg + 1]
    }

    pub fn any_on(&self) -> bool {
        self.gates.iter().any(|&g| g)
    }

    /// Forces the gates of masked switches off.
    pub fn masked(mut self, open: &[bool; 6]) -> Self {
        for (g, &m) in self.gates.iter_mut().zip(open) {
            *g &= !m;
        }
        self
    }
}

/// Triangle carrier in `[-1, 1]`: `+1` at phase 0 and 1, `-1` at phase 0.5.
pub fn carrier(phase: f64) -> f64 {
    let p = phase - phase.floor();
    4.0 * (p - 0.5).abs() - 1.0
}

/// Compares each phase's modulating signal with the carrier. Upper gates
/// are on when the signal is at or above the carrier; lower gates are the
/// complement.
pub fn pwm_modulate(modulating: [f64; 3], carrier_phase: f64) -> GateCommand {
    let c = carrier(carrier_phase);
    let mut gates = [false; 6];
    for (leg, &m) in modulating.iter().enumerate() {
        let upper = m >= c;
        gates[2 * leg] = upper;
        gates[2 * leg + 1] = !upper;
    }
    GateCommand { gates }
}

/// Fraction of the carrier interval `[phase_start, phase_end]` during which
/// each upper gate is on. The interval must not straddle a carrier peak or
/// valley, so the carrier is linear across it.
pub fn pwm_duty(modulating: [f64; 3], phase_start: f64, phase_end: f64) -> [f64; 3] {
    let c0 = carrier(phase_start);
    // Extrapolate from the midpoint so an end phase of exactly 1.0 is not
    // folded back to 0.
    let c1 = c0 + 2.0 * (carrier(0.5 * (phase_start + phase_end)) - c0);
    modulating.map(|m| {
        if c1 > c0 {
            ((m - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else if c1 < c0 {
            ((m - c1) / (c0 - c1)).clamp(0.0, 1.0)
        } else if m >= c0 {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Upper-gate duty over one carrier period sampled at step midpoints.
    fn duty(m: f64, steps: usize) -> f64 {
        let on = (0..steps)
            .filter(|&k| pwm_modulate([m, 0.0, 0.0], (k as f64 + 0.5) / steps as f64).upper(0))
            .count();
        on as f64 / steps as f64
    }

    #[test]
    fn saturation() {
        assert_eq!(duty(1.0, 20), 1.0);
        assert_eq!(duty(-1.0, 20), 0.0);
    }

    #[test]
    fn zero_gives_half_duty() {
        assert_eq!(duty(0.0, 20), 0.5);
        assert_eq!(duty(0.0, 1000), 0.5);
    }

    #[test]
    fn duty_is_linear_in_modulation() {
        for &m in &[-0.8, -0.3, 0.25, 0.6] {
            let d = duty(m, 10_000);
            assert!((d - (1.0 + m) / 2.0).abs() < 1e-3, "m={m} duty={d}");
        }
    }

    #[test]
    fn legs_are_complementary() {
        for k in 0..40 {
            let g = pwm_modulate([0.3, -0.7, 0.9], k as f64 / 40.0);
            for leg in 0..3 {
                assert_ne!(g.upper(leg), g.lower(leg));
            }
        }
    }

    #[test]
    fn step_duties_sum_to_carrier_duty() {
        for &m in &[-1.0, -0.62, 0.0, 0.37, 1.0] {
            let total: f64 = (0..20)
                .map(|k| pwm_duty([m, 0.0, 0.0], k as f64 / 20.0, (k + 1) as f64 / 20.0)[0])
                .sum::<f64>()
                / 20.0;
            assert!((total - (1.0 + m) / 2.0).abs() < 1e-12, "m={m} duty={total}");
        }
    }

    #[test]
    fn step_duty_matches_fine_sampling() {
        let m = 0.43;
        let (a, b) = (0.55, 0.6);
        let fine = (0..100_000)
            .filter(|&k| pwm_modulate([m, 0.0, 0.0], a + (b - a) * (k as f64 + 0.5) / 100_000.0).upper(0))
            .count() as f64
            / 100_000.0;
        assert!((pwm_duty([m, 0.0, 0.0], a, b)[0] - fine).abs() < 1e-4);
    }

    #[test]
    fn masking_only_clears() {
        let g = pwm_modulate([1.0, 1.0, -1.0], 0.3);
        let m = g.masked(&[true, false, false, false, false, true]);
        assert!(!m.upper(0));
        assert!(m.upper(1));
        assert!(!m.lower(2));
    }
}
