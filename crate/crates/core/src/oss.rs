//! Onset strength signals.
//!
//! Every estimator returns one value per spectrogram frame. Frames for which a
//! difference is undefined (the first one or two, or the first `mu` for
//! superflux) are set to zero so all signals share the spectrogram's frame grid.

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{max_filter_freq, ComplexSpectrogram, MagnitudeSpectrogram};

/// A frame-rate novelty curve.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetStrengthSignal {
    pub values: Vec<f64>,
    pub hop_seconds: f64,
    /// Time of frame 0 in seconds. STFT-derived signals use the centre of the
    /// first analysis window; imported signals use 0.
    pub time_offset_seconds: f64,
}

impl OnsetStrengthSignal {
    pub fn new(values: Vec<f64>, hop_seconds: f64) -> Self {
        Self {
            values,
            hop_seconds,
            time_offset_seconds: 0.0,
        }
    }

    fn from_frames(values: Vec<f64>, hop_seconds: f64, frame_seconds: f64) -> Self {
        Self {
            values,
            hop_seconds,
            time_offset_seconds: frame_seconds / 2.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.values.len() as f64 * self.hop_seconds
    }

    /// Same metadata, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            hop_seconds: self.hop_seconds,
            time_offset_seconds: self.time_offset_seconds,
        }
    }

    /// Serialize to the external OSS text format. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = format!("hop_seconds={}\n", self.hop_seconds);
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// `(x + |x|) / 2`
#[inline]
pub fn half_wave_rectify(x: f64) -> f64 {
    (x + x.abs()) / 2.0
}

fn require_frames(got: usize, needed: usize) -> Result<()> {
    if got < needed {
        Err(Error::TooFewFrames { needed, got })
    } else {
        Ok(())
    }
}

/// Complex domain deviation from a constant-magnitude, constant-phase-rate
/// prediction. The predicted phase `2*phi(n-1) - phi(n-2)` enters only through
/// `exp(j*.)`, so principal-value phases give the same prediction as phases
/// unwrapped along time.
///
/// With `rectify`, only bins whose magnitude grows contribute.
pub fn oss_complex_domain(spec: &ComplexSpectrogram, rectify: bool) -> Result<OnsetStrengthSignal> {
    let n_frames = spec.n_frames();
    require_frames(n_frames, 3)?;
    let x = &spec.frames;
    let mut values = vec![0.0; n_frames];
    for n in 2..n_frames {
        let mut acc = 0.0;
        for k in 0..spec.n_bins() {
            let cur = x[[n, k]];
            let prev = x[[n - 1, k]];
            let prev2 = x[[n - 2, k]];
            let predicted_phase = 2.0 * prev.arg() - prev2.arg();
            let target = Complex64::from_polar(prev.norm(), predicted_phase);
            if rectify && cur.norm() < prev.norm() {
                continue;
            }
            acc += (cur - target).norm();
        }
        values[n] = acc;
    }
    Ok(OnsetStrengthSignal::from_frames(
        values,
        spec.hop_seconds,
        spec.frame_seconds,
    ))
}

fn rectified_difference(mag: &MagnitudeSpectrogram, offset: usize) -> Vec<f64> {
    let frames = &mag.frames;
    let mut values = vec![0.0; mag.n_frames()];
    for (n, v) in values.iter_mut().enumerate().skip(offset) {
        *v = frames
            .row(n)
            .iter()
            .zip(frames.row(n - offset).iter())
            .map(|(&cur, &prev)| half_wave_rectify(cur - prev))
            .sum();
    }
    values
}

/// Sum of positive bin-wise magnitude increases between adjacent frames.
pub fn oss_spectral_flux(mag: &MagnitudeSpectrogram) -> Result<OnsetStrengthSignal> {
    require_frames(mag.n_frames(), 2)?;
    Ok(OnsetStrengthSignal::from_frames(
        rectified_difference(mag, 1),
        mag.hop_seconds,
        mag.frame_seconds,
    ))
}

/// Spectral flux over a frequency-max-filtered spectrogram, differenced
/// `mu_offset` frames apart. The input is expected to be the log-filterbank
/// output; `max_radius = 0` skips the max filter.
pub fn oss_superflux(
    filtered_mag: &MagnitudeSpectrogram,
    mu_offset: usize,
    max_radius: usize,
) -> Result<OnsetStrengthSignal> {
    if mu_offset == 0 {
        return Err(Error::InvalidConfig("superflux offset must be >= 1".into()));
    }
    require_frames(filtered_mag.n_frames(), mu_offset + 1)?;
    let maxed = max_filter_freq(filtered_mag, max_radius);
    Ok(OnsetStrengthSignal::from_frames(
        rectified_difference(&maxed, mu_offset),
        filtered_mag.hop_seconds,
        filtered_mag.frame_seconds,
    ))
}

/// Short-time spectral average: the mean magnitude of each frame.
pub fn oss_stsa(mag: &MagnitudeSpectrogram) -> Result<OnsetStrengthSignal> {
    let n_bins = mag.n_bins();
    if n_bins == 0 {
        return Err(Error::InvalidConfig("spectrogram has no bins".into()));
    }
    let values = mag
        .frames
        .rows()
        .into_iter()
        .map(|row| row.sum() / n_bins as f64)
        .collect();
    Ok(OnsetStrengthSignal::from_frames(
        values,
        mag.hop_seconds,
        mag.frame_seconds,
    ))
}
