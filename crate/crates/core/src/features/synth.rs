use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Divisors smaller than this in magnitude are replaced by `±RATIO_EPSILON`
/// and ratios are clamped to `±1 / RATIO_EPSILON`.
pub const RATIO_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSetKind {
    Original,
    Additive,
    Multiplicative,
}

impl FeatureSetKind {
    pub const ALL: [FeatureSetKind; 3] =
        [FeatureSetKind::Original, FeatureSetKind::Additive, FeatureSetKind::Multiplicative];

    pub fn len(self) -> usize {
        match self {
            FeatureSetKind::Original => 3,
            FeatureSetKind::Additive => 9,
            FeatureSetKind::Multiplicative => 10,
        }
    }

    /// Default number of features tried per split, `ceil(sqrt(K))`.
    pub fn default_mtry(self) -> usize {
        (self.len() as f64).sqrt().ceil() as usize
    }
}

impl fmt::Display for FeatureSetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSetKind::Original => "original",
            FeatureSetKind::Additive => "additive",
            FeatureSetKind::Multiplicative => "multiplicative",
        })
    }
}

impl FromStr for FeatureSetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(FeatureSetKind::Original),
            "additive" => Ok(FeatureSetKind::Additive),
            "multiplicative" => Ok(FeatureSetKind::Multiplicative),
            other => Err(Error::Data(format!("unknown feature set {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub t: f64,
    pub values: Vec<f64>,
}

pub fn guarded_ratio(num: f64, den: f64) -> f64 {
    let den = if den.abs() < RATIO_EPSILON {
        if den < 0.0 {
            -RATIO_EPSILON
        } else {
            RATIO_EPSILON
        }
    } else {
        den
    };
    let limit = 1.0 / RATIO_EPSILON;
    (num / den).clamp(-limit, limit)
}

/// Appends the features of `(i_a, i_b, i_c)` to `out`.
pub fn synthesize_into(ia: f64, ib: f64, ic: f64, kind: FeatureSetKind, out: &mut Vec<f64>) {
    match kind {
        FeatureSetKind::Original => out.extend_from_slice(&[ia, ib, ic]),
        FeatureSetKind::Additive => out.extend_from_slice(&[
            ia,
            ib,
            ic,
            ia + ib,
            ia + ic,
            ia + ib + ic,
            ia - ib,
            ia - ic,
            ia - ib - ic,
        ]),
        FeatureSetKind::Multiplicative => out.extend_from_slice(&[
            ia,
            ib,
            ic,
            ia * ib,
            ia * ic,
            ib * ic,
            ia * ib * ic,
            guarded_ratio(ia, ib),
            guarded_ratio(ia, ic),
            guarded_ratio(ib, ic),
        ]),
    }
}

pub fn synthesize(ia: f64, ib: f64, ic: f64, kind: FeatureSetKind) -> Vec<f64> {
    let mut out = Vec::with_capacity(kind.len());
    synthesize_into(ia, ib, ic, kind, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixture_additive() {
        assert_eq!(
            synthesize(1.0, 2.0, 4.0, FeatureSetKind::Additive),
            vec![1.0, 2.0, 4.0, 3.0, 5.0, 7.0, -1.0, -3.0, -5.0]
        );
    }

    #[test]
    fn fixture_multiplicative() {
        assert_eq!(
            synthesize(1.0, 2.0, 4.0, FeatureSetKind::Multiplicative),
            vec![1.0, 2.0, 4.0, 2.0, 4.0, 8.0, 8.0, 0.5, 0.25, 0.5]
        );
    }

    #[test]
    fn zero_divisor_uses_guard() {
        // 1 / (+eps) = 1000, 1 / 2, 0 / 2
        assert_eq!(
            synthesize(1.0, 0.0, 2.0, FeatureSetKind::Multiplicative),
            vec![1.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 1000.0, 0.5, 0.0]
        );
        assert_eq!(guarded_ratio(-1.0, -0.0001), 1000.0);
        assert_eq!(guarded_ratio(5.0, 0.002), 1000.0);
    }

    #[test]
    fn kinds_parse_and_count() {
        for kind in FeatureSetKind::ALL {
            assert_eq!(kind.to_string().parse::<FeatureSetKind>().unwrap(), kind);
        }
        assert_eq!(FeatureSetKind::Original.default_mtry(), 2);
        assert_eq!(FeatureSetKind::Additive.default_mtry(), 3);
        assert_eq!(FeatureSetKind::Multiplicative.default_mtry(), 4);
        assert!("ratio".parse::<FeatureSetKind>().is_err());
    }

    proptest! {
        #[test]
        fn lengths_and_finiteness(ia in -1.0f64..=1.0, ib in -1.0f64..=1.0, ic in -1.0f64..=1.0) {
            for kind in FeatureSetKind::ALL {
                let v = synthesize(ia, ib, ic, kind);
                prop_assert_eq!(v.len(), kind.len());
                prop_assert!(v.iter().all(|x| x.is_finite()));
            }
        }
    }
}
