use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TARGET_MIN: f64 = -1.0;
pub const TARGET_MAX: f64 = 1.0;

/// Min-max maps a group onto `[-1, 1]`. A constant group maps every value
/// to `-1`.
pub fn normalize(group: &[f64]) -> Result<Vec<f64>> {
    if group.is_empty() {
        return Err(Error::Empty("normalization group"));
    }
    let (lo, hi) = extrema(group.iter().copied());
    Ok(group.iter().map(|&x| scale(x, lo, hi)).collect())
}

fn extrema(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

#[inline]
fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        TARGET_MIN
    } else {
        let y = (TARGET_MAX - TARGET_MIN) * (x - lo) / (hi - lo) + TARGET_MIN;
        // Rounding can land a hair outside the target range.
        y.clamp(TARGET_MIN, TARGET_MAX)
    }
}

/// How the three phase channels of a window are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// One group per phase channel.
    PerPhase,
    /// A single group holding all three channels, so the relative amplitude
    /// of the phases survives normalization.
    #[default]
    Joint,
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationMode::PerPhase => "per-phase",
            NormalizationMode::Joint => "joint",
        })
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-phase" => Ok(NormalizationMode::PerPhase),
            "joint" => Ok(NormalizationMode::Joint),
            other => Err(Error::Data(format!("unknown normalization mode {other:?}"))),
        }
    }
}

/// Normalizes a window of `(i_a, i_b, i_c)` rows.
pub fn normalize_window(window: &[[f64; 3]], mode: NormalizationMode) -> Result<Vec<[f64; 3]>> {
    if window.is_empty() {
        return Err(Error::Empty("normalization window"));
    }
    let ranges: [(f64, f64); 3] = match mode {
        NormalizationMode::PerPhase => [0, 1, 2].map(|k| extrema(window.iter().map(|row| row[k]))),
        NormalizationMode::Joint => {
            let r = extrema(window.iter().flat_map(|row| row.iter().copied()));
            [r; 3]
        }
    };
    Ok(window
        .iter()
        .map(|row| [0, 1, 2].map(|k| scale(row[k], ranges[k].0, ranges[k].1)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(normalize(&[2.0, 4.0, 6.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(normalize(&[-3.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_group_maps_to_lower_target() {
        assert_eq!(normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![-1.0, -1.0, -1.0]);
    }

    #[test]
    fn empty_group_rejected() {
        assert!(normalize(&[]).is_err());
        assert!(normalize_window(&[], NormalizationMode::Joint).is_err());
    }

    #[test]
    fn joint_mode_keeps_relative_amplitude() {
        let w = [[0.0, -2.0, 1.0], [2.0, 0.0, 1.0]];
        let joint = normalize_window(&w, NormalizationMode::Joint).unwrap();
        assert_eq!(joint, vec![[0.0, -1.0, 0.5], [1.0, 0.0, 0.5]]);
        let per = normalize_window(&w, NormalizationMode::PerPhase).unwrap();
        assert_eq!(per, vec![[-1.0, -1.0, -1.0], [1.0, 1.0, -1.0]]);
    }

    proptest! {
        #[test]
        fn output_in_range_with_exact_extrema(v in prop::collection::vec(-1e3f64..1e3, 2..64)) {
            let out = normalize(&v).unwrap();
            prop_assert!(out.iter().all(|y| (-1.0..=1.0).contains(y)));
            let (lo, hi) = extrema(v.iter().copied());
            if lo != hi {
                let imin = v.iter().position(|&x| x == lo).unwrap();
                let imax = v.iter().position(|&x| x == hi).unwrap();
                prop_assert_eq!(out[imin], -1.0);
                prop_assert_eq!(out[imax], 1.0);
            }
        }

        #[test]
        fn idempotent_on_normalized(v in prop::collection::vec(-1.0f64..1.0, 1..64)) {
            let mut g = v.clone();
            g.push(-1.0);
            g.push(1.0);
            let out = normalize(&g).unwrap();
            for (a, b) in out.iter().zip(&g) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn invariant_under_positive_affine(
            v in prop::collection::vec(-100.0f64..100.0, 2..64),
            a in 0.01f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let base = normalize(&v).unwrap();
            let moved: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let out = normalize(&moved).unwrap();
            for (x, y) in base.iter().zip(&out) {
                prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
            }
        }
    }
}
