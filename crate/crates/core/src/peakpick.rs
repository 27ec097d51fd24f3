//! Peak picking: valley-peak distance (VPD) and two moving-threshold pickers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oss::OnsetStrengthSignal;

/// Local extrema of a sequence. After construction every peak has exactly one
/// preceding valley: `valleys[i] < peaks[i]` and `peaks[i] < valleys[i + 1]`.
/// A trailing valley with no following peak may remain at the end of `valleys`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeakValleySet {
    pub peaks: Vec<usize>,
    pub valleys: Vec<usize>,
}

impl PeakValleySet {
    /// `(valley, peak)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.valleys.iter().copied().zip(self.peaks.iter().copied())
    }
}

/// Find peaks (`x[n-1] < x[n] > x[n+1]`) and valleys (`x[n-1] > x[n] < x[n+1]`).
///
/// Plateaus count as a single extremum located at their first sample, decided
/// by comparing against the next strictly different value. When the first
/// extremum is a peak, index 0 is prepended as a virtual valley.
pub fn find_peaks_valleys(x: &[f64]) -> Result<PeakValleySet> {
    let len = x.len();
    if len < 3 {
        return Err(Error::TooShort { needed: 3, got: len });
    }
    let mut set = PeakValleySet::default();
    let mut n = 1;
    while n + 1 < len {
        if x[n] == x[n - 1] {
            n += 1;
            continue;
        }
        let mut next = n + 1;
        while next < len && x[next] == x[n] {
            next += 1;
        }
        if next == len {
            break;
        }
        if x[n - 1] < x[n] && x[n] > x[next] {
            set.peaks.push(n);
        } else if x[n - 1] > x[n] && x[n] < x[next] {
            set.valleys.push(n);
        }
        n = next;
    }
    if let Some(&first_peak) = set.peaks.first() {
        if set.valleys.first().is_none_or(|&v| v > first_peak) {
            set.valleys.insert(0, 0);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VpdConfig {
    /// Fraction of the largest valley-peak distance a peak must exceed.
    /// Values between 0.75 and 1 work well in practice.
    pub mu_scale: f64,
}

impl Default for VpdConfig {
    fn default() -> Self {
        Self { mu_scale: 0.80 }
    }
}

impl VpdConfig {
    pub fn new(mu_scale: f64) -> Result<Self> {
        let cfg = Self { mu_scale };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_scale > 0.0 && self.mu_scale <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "vpd mu must be in (0, 1], got {}",
                self.mu_scale
            )))
        }
    }
}

/// Valley-peak distance picking over a raw sequence. Returns the valleys whose
/// rise to the following peak exceeds `mu_scale` times the largest such rise.
pub fn vpd_pick_values(x: &[f64], cfg: &VpdConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let set = find_peaks_valleys(x)?;
    let distances: Vec<(usize, f64)> = set.pairs().map(|(v, p)| (v, x[p] - x[v])).collect();
    let Some(max) = distances.iter().map(|&(_, d)| d).reduce(f64::max) else {
        return Ok(Vec::new());
    };
    let threshold = cfg.mu_scale * max;
    Ok(distances
        .into_iter()
        .filter(|&(_, d)| d > threshold)
        .map(|(v, _)| v)
        .collect())
}

/// Onset frames of `oss` by valley-peak distance.
pub fn vpd_pick(oss: &OnsetStrengthSignal, cfg: &VpdConfig) -> Result<Vec<usize>> {
    vpd_pick_values(&oss.values, cfg)
}

/// Window and threshold settings shared by the two moving-threshold pickers.
/// A frame is an onset when it is the maximum of
/// `[n - pre_max, n + post_max]`, reaches the mean of
/// `[n - pre_avg, n + post_avg]` plus `delta`, and lies at least
/// `combination_frames` after the previous onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickerParams {
    pub pre_max_frames: usize,
    pub post_max_frames: usize,
    pub pre_avg_frames: usize,
    pub post_avg_frames: usize,
    pub delta: f64,
    pub combination_frames: usize,
}

fn frames_for(seconds: f64, hop_seconds: f64) -> usize {
    (seconds / hop_seconds).round() as usize
}

impl PickerParams {
    /// Defaults after Dixon (2006): a +-3 frame maximum window and a mean
    /// window reaching 3x further into the past, expressed at a 10 ms hop and
    /// rescaled to `hop_seconds`. The signal is expected to be z-scored.
    pub fn pp1_defaults(hop_seconds: f64) -> Self {
        Self {
            pre_max_frames: frames_for(0.03, hop_seconds).max(1),
            post_max_frames: frames_for(0.03, hop_seconds).max(1),
            pre_avg_frames: frames_for(0.09, hop_seconds),
            post_avg_frames: frames_for(0.03, hop_seconds),
            delta: 0.5,
            combination_frames: 0,
        }
    }

    /// Defaults after the superflux reference settings (Böck et al.): pre/post
    /// max 10/50 ms, pre/post average 150/0 ms, onsets combined within 30 ms.
    pub fn pp2_defaults(hop_seconds: f64) -> Self {
        Self {
            pre_max_frames: frames_for(0.01, hop_seconds).max(1),
            post_max_frames: frames_for(0.05, hop_seconds),
            pre_avg_frames: frames_for(0.15, hop_seconds),
            post_avg_frames: 0,
            delta: 1.1,
            combination_frames: frames_for(0.03, hop_seconds),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let windows = [
            self.pre_max_frames,
            self.post_max_frames,
            self.pre_avg_frames,
            self.post_avg_frames,
        ];
        if windows.iter().all(|&w| w == 0) {
            return Err(Error::InvalidConfig(
                "at least one picker window must be nonzero".into(),
            ));
        }
        if self.delta.is_nan() || self.delta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "picker delta must be >= 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    fn longest_window(&self) -> usize {
        self.pre_max_frames
            .max(self.post_max_frames)
            .max(self.pre_avg_frames)
            .max(self.post_avg_frames)
    }
}

fn threshold_pick(x: &[f64], params: &PickerParams) -> Result<Vec<usize>> {
    params.validate()?;
    let len = x.len();
    let needed = params.longest_window() + 1;
    if len < needed {
        return Err(Error::TooShort { needed, got: len });
    }

    // prefix sums keep the moving mean O(1) per frame
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }

    let mut onsets: Vec<usize> = Vec::new();
    for n in 0..len {
        let lo = n.saturating_sub(params.pre_max_frames);
        let hi = (n + params.post_max_frames).min(len - 1);
        if x[lo..=hi].iter().any(|&v| v > x[n]) {
            continue;
        }
        let lo = n.saturating_sub(params.pre_avg_frames);
        let hi = (n + params.post_avg_frames).min(len - 1);
        let mean = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
        if !(x[n] >= mean + params.delta) {
            continue;
        }
        if let Some(&last) = onsets.last() {
            if n - last < params.combination_frames {
                continue;
            }
        }
        onsets.push(n);
    }
    Ok(onsets)
}

/// Moving-maximum / moving-mean picker in the style of Dixon (2006).
pub fn pp1_pick(oss: &OnsetStrengthSignal, params: &PickerParams) -> Result<Vec<usize>> {
    threshold_pick(&oss.values, params)
}

/// Moving-maximum / moving-mean picker with onset combination, as used with superflux.
pub fn pp2_pick(oss: &OnsetStrengthSignal, params: &PickerParams) -> Result<Vec<usize>> {
    threshold_pick(&oss.values, params)
}

/// `t = frame * hop_seconds`; frames must be strictly increasing.
pub fn frames_to_times(frames: &[usize], hop_seconds: f64) -> Result<Vec<f64>> {
    frames_to_times_with_offset(frames, hop_seconds, 0.0)
}

/// `t = offset + frame * hop_seconds`.
pub fn frames_to_times_with_offset(
    frames: &[usize],
    hop_seconds: f64,
    offset_seconds: f64,
) -> Result<Vec<f64>> {
    if frames.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NonMonotonicInput);
    }
    Ok(frames
        .iter()
        .map(|&f| offset_seconds + f as f64 * hop_seconds)
        .collect())
}

/// Subtract the mean and divide by the standard deviation. Constant input is
/// only centred.
pub fn zscore(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 {
        values.iter().map(|v| (v - mean) / std).collect()
    } else {
        values.iter().map(|v| v - mean).collect()
    }
}
