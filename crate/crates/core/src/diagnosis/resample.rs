use crate::error::{Error, Result};
use crate::sim::{PhaseSample, WaveformTrace};

/// Input timestamps may drift from the ideal grid by this fraction of an
/// input period before the stream counts as having a gap.
const GAP_TOLERANCE: f64 = 0.25;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn integer_rate(rate: f64) -> Result<u64> {
    if rate.is_finite() && rate >= 1.0 && rate.fract() == 0.0 {
        Ok(rate as u64)
    } else {
        Err(Error::InvalidParams(format!("sample rate {rate} must be a positive integer")))
    }
}

/// Streaming linear-interpolation resampler between integer rates.
///
/// Output sample `k` sits at `t0 + k / output_rate`, where `t0` is the first
/// input timestamp. Values are interpolated between the bracketing input
/// samples; the label is taken from the latest input at or before the
/// output time.
#[derive(Debug, Clone)]
pub struct Resampler {
    input_rate: f64,
    output_rate: f64,
    // Input position of output k is k * num / den input periods.
    num: u64,
    den: u64,
    t0: f64,
    n_in: u64,
    next_out: u64,
    prev: Option<PhaseSample>,
}

impl Resampler {
    pub fn new(input_rate: f64, output_rate: f64) -> Result<Self> {
        let (i, o) = (integer_rate(input_rate)?, integer_rate(output_rate)?);
        let g = gcd(i, o);
        Ok(Resampler {
            input_rate,
            output_rate,
            num: i / g,
            den: o / g,
            t0: 0.0,
            n_in: 0,
            next_out: 0,
            prev: None,
        })
    }

    pub fn output_rate(&self) -> f64 {
        self.output_rate
    }

    /// Feeds one input sample and appends any outputs it completes.
    pub fn push(&mut self, s: &PhaseSample, out: &mut Vec<PhaseSample>) -> Result<()> {
        let n = self.n_in;
        if n == 0 {
            self.t0 = s.t;
        } else {
            let expected = self.t0 + n as f64 / self.input_rate;
            if (s.t - expected).abs() > GAP_TOLERANCE / self.input_rate {
                return Err(Error::StreamGap { index: n as usize, time: s.t });
            }
        }
        // Emit every output whose position lies in (n - 1, n].
        loop {
            let k = self.next_out;
            let scaled = k * self.num;
            let j = scaled / self.den;
            let rem = scaled % self.den;
            let at_or_before = j < n || (j == n && rem == 0);
            if !at_or_before {
                break;
            }
            let t = self.t0 + k as f64 / self.output_rate;
            let sample = if rem == 0 {
                PhaseSample { t, ..*s }
            } else {
                let a = self.prev.as_ref().expect("bracketing sample");
                let w = rem as f64 / self.den as f64;
                let lerp = |x: f64, y: f64| x + w * (y - x);
                PhaseSample {
                    t,
                    ia: lerp(a.ia, s.ia),
                    ib: lerp(a.ib, s.ib),
                    ic: lerp(a.ic, s.ic),
                    vdc: lerp(a.vdc, s.vdc),
                    label: a.label,
                }
            };
            out.push(sample);
            self.next_out += 1;
        }
        self.prev = Some(*s);
        self.n_in += 1;
        Ok(())
    }
}

/// Resamples a whole trace to `output_rate`.
pub fn resample(trace: &WaveformTrace, output_rate: f64) -> Result<WaveformTrace> {
    let mut r = Resampler::new(trace.sample_rate, output_rate)?;
    let mut out = WaveformTrace::new(output_rate);
    out.samples.reserve((trace.len() as f64 * output_rate / trace.sample_rate) as usize + 1);
    for s in &trace.samples {
        r.push(s, &mut out.samples)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::FaultCode;
    use std::f64::consts::TAU;

    fn trace(rate: f64, secs: f64, f: impl Fn(f64) -> f64) -> WaveformTrace {
        let mut t = WaveformTrace::new(rate);
        let n = (secs * rate).round() as usize;
        for k in 0..n {
            let time = k as f64 / rate;
            let v = f(time);
            t.samples.push(PhaseSample { t: time, ia: v, ib: -v, ic: 0.5 * v, vdc: 100.0, label: Some(FaultCode::NORMAL) });
        }
        t
    }

    #[test]
    fn one_second_gives_exact_count() {
        let out = resample(&trace(25_600.0, 1.0, |_| 1.0), 10_000.0).unwrap();
        assert_eq!(out.len(), 10_000);
        for (k, s) in out.samples.iter().enumerate() {
            assert_eq!(s.t, k as f64 / 10_000.0);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let out = resample(&trace(25_600.0, 0.1, |_| 3.25), 10_000.0).unwrap();
        assert!(out.samples.iter().all(|s| s.ia == 3.25 && s.ib == -3.25 && s.vdc == 100.0));
    }

    #[test]
    fn sinusoid_amplitude_preserved() {
        let f = |t: f64| 10.0 * (TAU * 50.0 * t).sin();
        let out = resample(&trace(25_600.0, 0.2, f), 10_000.0).unwrap();
        assert_eq!(out.len(), 2_000);
        let err = out.samples.iter().map(|s| (s.ia - f(s.t)).abs()).fold(0.0, f64::max);
        assert!(err < 0.1e-2 * 10.0, "max error {err}");
        let peak = out.samples.iter().map(|s| s.ia.abs()).fold(0.0, f64::max);
        assert!((peak - 10.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn two_hundred_per_period() {
        let out = resample(&trace(25_600.0, 0.02, |t| t), 10_000.0).unwrap();
        assert_eq!(out.len(), 200);
    }

    #[test]
    fn gap_rejected() {
        let mut t = trace(25_600.0, 0.01, |_| 0.0);
        t.samples.remove(40);
        let err = resample(&t, 10_000.0).unwrap_err();
        assert!(matches!(err, Error::StreamGap { index: 40, .. }));
    }

    #[test]
    fn label_from_latest_input() {
        let mut t = trace(25_600.0, 0.01, |_| 0.0);
        let s1 = FaultCode::from_switches(&[1]);
        for s in t.samples.iter_mut().skip(100) {
            s.label = Some(s1);
        }
        let out = resample(&t, 10_000.0).unwrap();
        for s in &out.samples {
            let latest = ((s.t * 25_600.0) + 1e-9).floor() as usize;
            assert_eq!(s.label, t.samples[latest].label);
        }
    }

    #[test]
    fn non_integer_rate_rejected() {
        assert!(Resampler::new(25_600.5, 10_000.0).is_err());
    }
}
