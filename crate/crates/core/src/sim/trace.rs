//! Sampled waveform traces and their CSV form (`t,ia,ib,ic,vdc,label`).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::code::FaultCode;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "t,ia,ib,ic,vdc,label";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub t: f64,
    pub ia: f64,
    pub ib: f64,
    pub ic: f64,
    pub vdc: f64,
    pub label: Option<FaultCode>,
}

impl PhaseSample {
    pub fn currents(&self) -> [f64; 3] {
        [self.ia, self.ib, self.ic]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WaveformTrace {
    /// Nominal sampling rate (Hz).
    pub sample_rate: f64,
    pub samples: Vec<PhaseSample>,
}

impl WaveformTrace {
    pub fn new(sample_rate: f64) -> Self {
        WaveformTrace { sample_rate, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn phase(&self, leg: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.currents()[leg]).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * self.samples.len() + 32);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for s in &self.samples {
            let label = s.label.map(|l| l.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{},{}", s.t, s.ia, s.ib, s.ic, s.vdc, label).unwrap();
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Parses a trace; the sampling rate is taken from the mean timestamp
    /// spacing rounded to whole hertz.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or(Error::Empty("trace file"))?;
        if header.trim_end() != TRACE_HEADER {
            return Err(Error::Data(format!("unexpected trace header {header:?}")));
        }
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Data(format!("trace line {}: expected 6 fields, got {}", n + 2, fields.len())));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("trace line {}: field {}: {e}", n + 2, k + 1)))
            };
            let label = match fields[5].trim() {
                "" => None,
                s => Some(s.parse()?),
            };
            samples.push(PhaseSample { t: num(0)?, ia: num(1)?, ib: num(2)?, ic: num(3)?, vdc: num(4)?, label });
        }
        let sample_rate = match samples.len() {
            0 | 1 => 0.0,
            n => ((n - 1) as f64 / (samples[n - 1].t - samples[0].t)).round(),
        };
        Ok(WaveformTrace { sample_rate, samples })
    }
}
