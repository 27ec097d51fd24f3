//! Scoring detected onsets against reference annotations.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default matching window in seconds.
pub const DEFAULT_TOLERANCE_S: f64 = 0.050;

/// Strictly increasing, non-negative onset times in seconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OnsetList(Vec<f64>);

impl OnsetList {
    /// Checks ordering, finiteness and sign.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidConfig(
                "onset times must be finite and non-negative".into(),
            ));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonMonotonicInput);
        }
        Ok(Self(times))
    }

    /// Sorts and removes exact duplicates. Negative or non-finite times are dropped.
    pub fn from_unsorted(mut times: Vec<f64>) -> Self {
        times.retain(|t| t.is_finite() && *t >= 0.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        Self(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// One value per line, shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.0 {
            let _ = writeln!(out, "{t}");
        }
        out
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parse the annotation text format: one time in seconds per line, blank lines
/// and lines starting with `#` ignored. The result is sorted and deduplicated.
pub fn parse_annotation_text(text: &str) -> Result<OnsetList> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut times = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let t = trimmed
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| Error::NonNumericLine {
                line: idx + 1,
                content: line.to_string(),
            })?;
        times.push(t);
    }
    Ok(OnsetList::from_unsorted(times))
}

pub fn parse_annotations(path: impl AsRef<Path>) -> Result<OnsetList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotation_text(&text).map_err(|e| e.in_file(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(reference, detection)` pairs.
    pub pairs: Vec<(f64, f64)>,
}

/// One-to-one matching within `±tolerance_s`.
///
/// References are visited in ascending order and each takes the earliest
/// unmatched detection inside its window. Detections that fall before the
/// current window can never match a later reference and are skipped. On
/// sorted lists this yields a maximum-cardinality matching, and between two
/// candidates at equal distance the earlier detection wins.
pub fn match_onsets(reference: &OnsetList, detected: &OnsetList, tolerance_s: f64) -> MatchResult {
    let refs = reference.times();
    let dets = detected.times();
    let within = |r: f64, d: f64| (d - r).abs() <= tolerance_s;
    let mut pairs = Vec::new();
    let mut j = 0;
    for &r in refs {
        while j < dets.len() && dets[j] < r && !within(r, dets[j]) {
            j += 1;
        }
        if j < dets.len() && within(r, dets[j]) {
            pairs.push((r, dets[j]));
            j += 1;
        }
    }
    let tp = pairs.len();
    MatchResult {
        tp,
        fp: dets.len() - tp,
        fn_: refs.len() - tp,
        pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

pub fn compute_metrics(m: &MatchResult) -> Metrics {
    Metrics::from_counts(m.tp, m.fp, m.fn_)
}

/// Macro average: the mean of each metric over files.
pub fn aggregate(per_file: &[Metrics]) -> Result<Metrics> {
    if per_file.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = per_file.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| per_file.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    })
}

/// Micro average: metrics of the pooled counts.
pub fn aggregate_micro(per_file: &[MatchResult]) -> Result<Metrics> {
    if per_file.is_empty() {
        return Err(Error::EmptyList);
    }
    let (tp, fp, fn_) = per_file
        .iter()
        .fold((0, 0, 0), |(a, b, c), m| (a + m.tp, b + m.fp, c + m.fn_));
    Ok(Metrics::from_counts(tp, fp, fn_))
}
