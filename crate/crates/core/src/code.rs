//! Six-bit IGBT fault codes.
//!
//! Bit `d_k` is set when switch `S_k` has an open-circuit fault. The textual
//! form lists `d1..d6` left to right, so `S1` alone is `100000`. The numeric
//! value reads that string as a binary number, which makes `000000` the
//! smallest code and `100000` (32) larger than `001000` (8).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const SWITCH_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FaultCode(u8);

impl FaultCode {
    pub const NORMAL: FaultCode = FaultCode(0);

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits < 64).then_some(FaultCode(bits))
    }

    /// Code with the given switches (1-based, `1..=6`) faulted.
    pub fn from_switches(switches: &[usize]) -> Self {
        let mut code = FaultCode::NORMAL;
        for &s in switches {
            code = code.with_switch(s);
        }
        code
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    fn mask(switch: usize) -> u8 {
        assert!((1..=SWITCH_COUNT).contains(&switch), "switch index {switch} out of range");
        1 << (SWITCH_COUNT - switch)
    }

    pub fn with_switch(self, switch: usize) -> Self {
        FaultCode(self.0 | Self::mask(switch))
    }

    pub fn has_switch(self, switch: usize) -> bool {
        self.0 & Self::mask(switch) != 0
    }

    pub fn is_normal(self) -> bool {
        self.0 == 0
    }

    /// Faulted switches in ascending order (1-based).
    pub fn switches(self) -> Vec<usize> {
        (1..=SWITCH_COUNT).filter(|&s| self.has_switch(s)).collect()
    }

    pub fn union(self, other: FaultCode) -> FaultCode {
        FaultCode(self.0 | other.0)
    }

    /// `true` if every bit of `self` is also set in `other`.
    pub fn is_subset_of(self, other: FaultCode) -> bool {
        self.0 & !other.0 == 0
    }

    /// Human-readable name: `normal`, `S1`, `S1S3`, ...
    pub fn name(self) -> String {
        if self.is_normal() {
            return "normal".to_string();
        }
        self.switches().iter().map(|s| format!("S{s}")).collect()
    }
}

impl fmt::Display for FaultCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06b}", self.0)
    }
}

impl FromStr for FaultCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.len() != SWITCH_COUNT || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::Data(format!("invalid fault code {s:?}")));
        }
        Ok(FaultCode(u8::from_str_radix(s, 2).expect("validated binary string")))
    }
}

impl Serialize for FaultCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FaultCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_codes() {
        assert_eq!(FaultCode::NORMAL.to_string(), "000000");
        assert_eq!(FaultCode::from_switches(&[1]).to_string(), "100000");
        assert_eq!(FaultCode::from_switches(&[6]).to_string(), "000001");
        assert_eq!(FaultCode::from_switches(&[1, 2]).to_string(), "110000");
        assert_eq!(FaultCode::from_switches(&[1, 3]).to_string(), "101000");
    }

    #[test]
    fn numeric_order_follows_binary_string() {
        let s1: FaultCode = "100000".parse().unwrap();
        let s3: FaultCode = "001000".parse().unwrap();
        assert!(s3 < s1);
        assert!(FaultCode::NORMAL < s3);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("10000".parse::<FaultCode>().is_err());
        assert!("10000x".parse::<FaultCode>().is_err());
        assert!("1000000".parse::<FaultCode>().is_err());
    }

    #[test]
    fn names() {
        assert_eq!(FaultCode::NORMAL.name(), "normal");
        assert_eq!(FaultCode::from_switches(&[1, 3]).name(), "S1S3");
    }
}
