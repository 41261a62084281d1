use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::normalize::{normalize_window, NormalizationMode};
use super::synth::{synthesize_into, FeatureSetKind};
use crate::code::FaultCode;
use crate::error::{Error, Result};
use crate::sim::WaveformTrace;

/// Labeled feature rows, stored row-major.
///
/// `groups` records which scenario run each row came from so splits can be
/// made per run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub n_features: usize,
    pub kind: Option<FeatureSetKind>,
    /// How the rows were normalized, when known.
    pub normalization: Option<NormalizationMode>,
    pub features: Vec<f64>,
    pub labels: Vec<FaultCode>,
    pub times: Vec<f64>,
    pub groups: Vec<u32>,
}

impl Dataset {
    pub fn new(n_features: usize, kind: Option<FeatureSetKind>) -> Self {
        Dataset { n_features, kind, ..Default::default() }
    }

    /// Builds an ungrouped dataset from rows, mainly for tests and fixtures.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[FaultCode]) -> Result<Self> {
        let n_features = rows.first().map(Vec::len).ok_or(Error::Empty("dataset rows"))?;
        if rows.len() != labels.len() {
            return Err(Error::Data(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let mut ds = Dataset::new(n_features, None);
        for (row, &label) in rows.iter().zip(labels) {
            ds.push(row, label, 0.0, 0)?;
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn push(&mut self, row: &[f64], label: FaultCode, t: f64, group: u32) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::FeatureLength { expected: self.n_features, got: row.len() });
        }
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.times.push(t);
        self.groups.push(group);
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.n_features != self.n_features {
            return Err(Error::FeatureLength { expected: self.n_features, got: other.n_features });
        }
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        self.times.extend_from_slice(&other.times);
        self.groups.extend_from_slice(&other.groups);
        Ok(())
    }

    pub fn with_group(mut self, group: u32) -> Self {
        self.groups.iter_mut().for_each(|g| *g = group);
        self
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset::new(self.n_features, self.kind);
        out.normalization = self.normalization;
        for &i in indices {
            out.features.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
            out.times.push(self.times[i]);
            out.groups.push(self.groups[i]);
        }
        out
    }

    /// Rows whose group is in `groups`.
    pub fn filter_groups(&self, groups: &BTreeSet<u32>) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| groups.contains(&self.groups[i])).collect();
        self.select(&idx)
    }

    /// Every `stride`-th row of each group, keeping order.
    pub fn thin(&self, stride: usize) -> Dataset {
        let stride = stride.max(1);
        let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let n = seen.entry(self.groups[i]).or_insert(0);
                *n += 1;
                (*n - 1) % stride == 0
            })
            .collect();
        self.select(&idx)
    }

    pub fn class_counts(&self) -> BTreeMap<FaultCode, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn csv_header(&self) -> String {
        let mut h: Vec<String> = (1..=self.n_features).map(|k| format!("f{k}")).collect();
        h.push("label".into());
        h.join(",")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * (self.n_features * 20 + 8));
        out.push_str(&self.csv_header());
        out.push('\n');
        for i in 0..self.len() {
            for v in self.row(i) {
                write!(out, "{v},").unwrap();
            }
            writeln!(out, "{}", self.labels[i]).unwrap();
        }
        out
    }

    /// Reads `f1..fK,label` rows. The feature-set kind is inferred from `K`
    /// (3, 9 or 10) when it matches one.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or(Error::Empty("dataset file"))?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        let n_features = cols.len().saturating_sub(1);
        let expected: Vec<String> = (1..=n_features).map(|k| format!("f{k}")).chain(["label".into()]).collect();
        if n_features == 0 || cols != expected {
            return Err(Error::Data(format!("unexpected dataset header {header:?}")));
        }
        let kind = FeatureSetKind::ALL.into_iter().find(|k| k.len() == n_features);
        let mut ds = Dataset::new(n_features, kind);
        let mut row = Vec::with_capacity(n_features);
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            row.clear();
            let mut fields = line.split(',');
            for k in 0..n_features {
                let f = fields.next().ok_or_else(|| Error::Data(format!("dataset line {}: too few fields", n + 2)))?;
                row.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Data(format!("dataset line {}: f{}: {e}", n + 2, k + 1)))?,
                );
            }
            let label = fields
                .next()
                .ok_or_else(|| Error::Data(format!("dataset line {}: missing label", n + 2)))?
                .parse()?;
            if fields.next().is_some() {
                return Err(Error::Data(format!("dataset line {}: too many fields", n + 2)));
            }
            ds.push(&row, label, 0.0, 0)?;
        }
        Ok(ds)
    }
}

/// One labeled feature row per trace sample. Samples are grouped into
/// consecutive windows of `window_len` (the last may be shorter) and each
/// window is normalized on its own.
pub fn assemble_dataset(
    trace: &WaveformTrace,
    kind: FeatureSetKind,
    mode: NormalizationMode,
    window_len: usize,
) -> Result<Dataset> {
    let mut ds = Dataset::new(kind.len(), Some(kind));
    ds.normalization = Some(mode);
    ds.features.reserve(trace.len() * kind.len());
    let mut rows = Vec::with_capacity(window_len);
    let mut buf = Vec::with_capacity(kind.len());
    for (w, chunk) in trace.samples.chunks(window_len.max(1)).enumerate() {
        rows.clear();
        rows.extend(chunk.iter().map(|s| s.currents()));
        let normalized = normalize_window(&rows, mode)?;
        for (k, (s, n)) in chunk.iter().zip(&normalized).enumerate() {
            let label = s.label.ok_or(Error::MissingLabel { index: w * window_len + k })?;
            buf.clear();
            synthesize_into(n[0], n[1], n[2], kind, &mut buf);
            ds.push(&buf, label, s.t, 0)?;
        }
    }
    Ok(ds)
}

/// Splits scenario runs per class: each class's runs are shuffled with
/// `seed` and `round(n * train_fraction)` of them go to training (at least
/// one on each side when a class has two or more runs).
pub fn split_by_scenario(
    runs: &[(u32, FaultCode)],
    train_fraction: f64,
    seed: u64,
) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let mut by_class: BTreeMap<FaultCode, Vec<u32>> = BTreeMap::new();
    for &(id, code) in runs {
        by_class.entry(code).or_default().push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (BTreeSet::new(), BTreeSet::new());
    for ids in by_class.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let mut n_train = (n as f64 * train_fraction).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        }
        train.extend(&ids[..n_train]);
        test.extend(&ids[n_train..]);
    }
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PhaseSample;

    fn trace(labels: &[Option<FaultCode>]) -> WaveformTrace {
        let mut t = WaveformTrace::new(10_000.0);
        for (k, &label) in labels.iter().enumerate() {
            let x = k as f64 * 0.1;
            t.samples.push(PhaseSample { t: k as f64 * 1e-4, ia: x.sin(), ib: x.cos(), ic: -x.sin() - x.cos(), vdc: 100.0, label });
        }
        t
    }

    #[test]
    fn healthy_trace_all_normal_and_order_preserved() {
        let tr = trace(&vec![Some(FaultCode::NORMAL); 450]);
        let ds = assemble_dataset(&tr, FeatureSetKind::Additive, NormalizationMode::Joint, 200).unwrap();
        assert_eq!(ds.len(), 450);
        assert_eq!(ds.n_features, 9);
        assert!(ds.labels.iter().all(|l| l.is_normal()));
        assert!(ds.times.windows(2).all(|w| w[0] < w[1]));
        assert!(ds.features.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn table_row_label_is_carried() {
        let s1 = FaultCode::from_switches(&[1]);
        let mut tr = WaveformTrace::new(10_000.0);
        tr.samples.push(PhaseSample { t: 0.0, ia: -0.332, ib: 7.638, ic: 2.324, vdc: 100.0, label: Some(s1) });
        let ds = assemble_dataset(&tr, FeatureSetKind::Original, NormalizationMode::Joint, 200).unwrap();
        assert_eq!(ds.labels, vec![s1]);
        assert_eq!(ds.labels[0].to_string(), "100000");
    }

    #[test]
    fn missing_label_rejected() {
        let mut labels = vec![Some(FaultCode::NORMAL); 10];
        labels[7] = None;
        let err = assemble_dataset(&trace(&labels), FeatureSetKind::Original, NormalizationMode::Joint, 4).unwrap_err();
        assert!(matches!(err, Error::MissingLabel { index: 7 }));
    }

    #[test]
    fn scenario_split_is_a_partition() {
        let s1 = FaultCode::from_switches(&[1]);
        let runs: Vec<(u32, FaultCode)> =
            (0..10).map(|i| (i, FaultCode::NORMAL)).chain((10..20).map(|i| (i, s1))).collect();
        let (train, test) = split_by_scenario(&runs, 0.7, 3);
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), 20);
        assert_eq!(train.iter().filter(|&&i| i < 10).count(), 7);
        assert_eq!(train.iter().filter(|&&i| i >= 10).count(), 7);
        assert_eq!(split_by_scenario(&runs, 0.7, 3), (train, test));
    }

    #[test]
    fn csv_round_trip() {
        let tr = trace(&vec![Some(FaultCode::from_switches(&[2, 3])); 30]);
        let ds = assemble_dataset(&tr, FeatureSetKind::Multiplicative, NormalizationMode::PerPhase, 200).unwrap();
        let text = ds.to_csv_string();
        assert!(text.starts_with("f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,label\n"));
        let back = Dataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.kind, Some(FeatureSetKind::Multiplicative));
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn thin_keeps_every_nth_per_group() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let mut ds = Dataset::from_rows(&rows, &[FaultCode::NORMAL; 10]).unwrap();
        ds.groups = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let t = ds.thin(2);
        assert_eq!(t.features, vec![0.0, 2.0, 4.0, 5.0, 7.0, 9.0]);
    }
}
