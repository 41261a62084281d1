//! Scenario config files.
//!
//! One `key = value` pair per line, `#` starts a comment. Keys are the
//! `CircuitParams` and `ControllerGains` field names plus `duration`, `seed`
//! and `noise_std`. Faults are listed as `fault = S1@0.100` (switch at onset
//! time in seconds) and load changes as `load_step = 0.200@8.0` (time in
//! seconds at load resistance in ohms). Both may repeat.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{LoadStep, Scenario};

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn number(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| err(line, format!("{key}: expected a number, got {value:?}")))?;
    if !v.is_finite() {
        return Err(err(line, format!("{key}: value must be finite")));
    }
    Ok(v)
}

fn fault(line: usize, value: &str) -> Result<(usize, f64)> {
    let (switch, onset) = value
        .split_once('@')
        .ok_or_else(|| err(line, format!("fault: expected S<k>@<onset>, got {value:?}")))?;
    let k = switch
        .trim()
        .strip_prefix(['S', 's'])
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|k| (1..=6).contains(k))
        .ok_or_else(|| err(line, format!("fault: unknown switch {:?}, expected S1..S6", switch.trim())))?;
    Ok((k, number(line, "fault onset", onset.trim())?))
}

fn load_step(line: usize, value: &str) -> Result<LoadStep> {
    let (time, r) = value
        .split_once('@')
        .ok_or_else(|| err(line, format!("load_step: expected <time>@<ohms>, got {value:?}")))?;
    Ok(LoadStep { time: number(line, "load_step time", time.trim())?, resistance: number(line, "load_step resistance", r.trim())? })
}

/// Parses a scenario, starting from the defaults. The result is validated.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut s = Scenario::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key = value, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key != "fault" && key != "load_step" && !seen.insert(key.to_string()) {
            return Err(err(line, format!("duplicate key {key}")));
        }
        let p = &mut s.params;
        let g = &mut s.gains;
        let slot = match key {
            "fault" => {
                let (k, onset) = fault(line, value)?;
                if s.faults.onsets[k - 1].is_some() {
                    return Err(err(line, format!("S{k} is listed twice")));
                }
                s.faults.onsets[k - 1] = Some(onset);
                continue;
            }
            "load_step" => {
                s.load_steps.push(load_step(line, value)?);
                continue;
            }
            "seed" => {
                s.seed = value.parse().map_err(|_| err(line, format!("seed: expected an unsigned integer, got {value:?}")))?;
                continue;
            }
            "duration" => &mut s.duration,
            "noise_std" => &mut s.noise_std,
            "input_phase_voltage_amplitude" => &mut p.input_phase_voltage_amplitude,
            "dc_link_voltage_ref" => &mut p.dc_link_voltage_ref,
            "filter_inductance" => &mut p.filter_inductance,
            "inductor_series_resistance" => &mut p.inductor_series_resistance,
            "dc_link_capacitance_per_half" => &mut p.dc_link_capacitance_per_half,
            "load_resistance" => &mut p.load_resistance,
            "grid_frequency" => &mut p.grid_frequency,
            "switching_frequency" => &mut p.switching_frequency,
            "control_sample_frequency" => &mut p.control_sample_frequency,
            "sim_step" => &mut p.sim_step,
            "voltage_kp" => &mut g.voltage_kp,
            "voltage_ki" => &mut g.voltage_ki,
            "current_kp" => &mut g.current_kp,
            "current_kr" => &mut g.current_kr,
            "resonant_bandwidth" => &mut g.resonant_bandwidth,
            "balance_gain" => &mut g.balance_gain,
            "current_limit" => &mut g.current_limit,
            _ => return Err(err(line, format!("unknown key {key}"))),
        };
        *slot = number(line, key, value)?;
    }
    s.load_steps.sort_by(|a, b| a.time.total_cmp(&b.time));
    s.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(s)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// Writes every field, so `parse_scenario(&scenario_to_config(s)) == s`.
pub fn scenario_to_config(s: &Scenario) -> String {
    let p = &s.params;
    let g = &s.gains;
    let mut out = String::new();
    let fields = [
        ("input_phase_voltage_amplitude", p.input_phase_voltage_amplitude),
        ("dc_link_voltage_ref", p.dc_link_voltage_ref),
        ("filter_inductance", p.filter_inductance),
        ("inductor_series_resistance", p.inductor_series_resistance),
        ("dc_link_capacitance_per_half", p.dc_link_capacitance_per_half),
        ("load_resistance", p.load_resistance),
        ("grid_frequency", p.grid_frequency),
        ("switching_frequency", p.switching_frequency),
        ("control_sample_frequency", p.control_sample_frequency),
        ("sim_step", p.sim_step),
        ("voltage_kp", g.voltage_kp),
        ("voltage_ki", g.voltage_ki),
        ("current_kp", g.current_kp),
        ("current_kr", g.current_kr),
        ("resonant_bandwidth", g.resonant_bandwidth),
        ("balance_gain", g.balance_gain),
        ("current_limit", g.current_limit),
        ("duration", s.duration),
        ("noise_std", s.noise_std),
    ];
    for (k, v) in fields {
        writeln!(out, "{k} = {v}").unwrap();
    }
    writeln!(out, "seed = {}", s.seed).unwrap();
    for (k, onset) in s.faults.onsets.iter().enumerate() {
        if let Some(t) = onset {
            writeln!(out, "fault = S{}@{t}", k + 1).unwrap();
        }
    }
    for step in &s.load_steps {
        writeln!(out, "load_step = {}@{}", step.time, step.resistance).unwrap();
    }
    out
}
