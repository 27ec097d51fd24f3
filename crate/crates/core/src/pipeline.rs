//! End-to-end detection: audio, spectrogram, onset strength, smoothing, picking.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io::{load_audio, load_external_oss, AudioBuffer};
use crate::cgd::{cgd_smooth, CgdConfig};
use crate::error::{Error, Result};
use crate::eval::OnsetList;
use crate::oss::{
    oss_complex_domain, oss_spectral_flux, oss_stsa, oss_superflux, OnsetStrengthSignal,
};
use crate::peakpick::{
    frames_to_times_with_offset, pp1_pick, pp2_pick, vpd_pick, zscore, PickerParams, VpdConfig,
};
use crate::spectral::{
    log_compress, stft, stft_magnitude, FilterbankConfig, LogFilterbank, StftConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OssMethod {
    ComplexDomain,
    SpectralFlux,
    Superflux,
    Stsa,
    /// Precomputed values read from a text file instead of audio.
    External,
}

impl std::str::FromStr for OssMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex_domain" | "cd" => Ok(Self::ComplexDomain),
            "spectral_flux" | "sf" => Ok(Self::SpectralFlux),
            "superflux" => Ok(Self::Superflux),
            "stsa" => Ok(Self::Stsa),
            "external" => Ok(Self::External),
            other => Err(Error::InvalidConfig(format!("unknown OSS method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickerKind {
    Vpd,
    Pp1,
    Pp2,
}

impl std::str::FromStr for PickerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vpd" => Ok(Self::Vpd),
            "pp1" => Ok(Self::Pp1),
            "pp2" => Ok(Self::Pp2),
            other => Err(Error::InvalidConfig(format!("unknown picker `{other}`"))),
        }
    }
}

/// Preset codes accepted by [`PipelineConfig::preset`].
pub const PRESET_CODES: [&str; 7] = ["1001", "1012", "2101", "2112", "3100", "4012", "5000"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub oss_method: OssMethod,
    pub use_cgd: bool,
    pub cgd: CgdConfig,
    pub picker: PickerKind,
    pub vpd: VpdConfig,
    /// Explicit PP1/PP2 parameters. When absent the picker's defaults for the
    /// configured hop are used.
    pub picker_params: Option<PickerParams>,
    /// Overrides the threshold of the PP1/PP2 parameters in use.
    pub pp_delta: Option<f64>,
    /// Z-score the OSS before PP1/PP2 so one threshold fits every estimator.
    pub normalize_oss: bool,
    pub stft: StftConfig,
    /// Frame offset of the superflux difference.
    pub superflux_mu: usize,
    /// Half-width of the superflux frequency max filter, in bands.
    pub superflux_max_radius: usize,
    /// Filterbank energies become `log10(gain * x + 1)`; `None` keeps them linear.
    pub superflux_log_mul: Option<f64>,
    pub filterbank: FilterbankConfig,
    /// Rectified complex domain variant.
    pub cd_rectify: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            oss_method: OssMethod::Stsa,
            use_cgd: true,
            cgd: CgdConfig::default(),
            picker: PickerKind::Vpd,
            vpd: VpdConfig::default(),
            picker_params: None,
            pp_delta: None,
            normalize_oss: true,
            stft: StftConfig::default(),
            superflux_mu: 1,
            superflux_max_radius: 1,
            superflux_log_mul: Some(1.0),
            filterbank: FilterbankConfig::default(),
            cd_rectify: false,
        }
    }
}

impl PipelineConfig {
    /// Named combinations: the first digit selects the estimator (1 complex
    /// domain, 2 spectral flux, 3 superflux, 4 spectral average, 5 external),
    /// the third whether CGD smoothing is applied, the last the picker
    /// (0 PP2, 1 PP1, 2 VPD).
    pub fn preset(code: &str) -> Result<Self> {
        let base = Self::default();
        let (oss_method, use_cgd, picker) = match code {
            "1001" => (OssMethod::ComplexDomain, false, PickerKind::Pp1),
            "1012" => (OssMethod::ComplexDomain, true, PickerKind::Vpd),
            "2101" => (OssMethod::SpectralFlux, false, PickerKind::Pp1),
            "2112" => (OssMethod::SpectralFlux, true, PickerKind::Vpd),
            "3100" => (OssMethod::Superflux, false, PickerKind::Pp2),
            "4012" => (OssMethod::Stsa, true, PickerKind::Vpd),
            "5000" => (OssMethod::External, false, PickerKind::Pp2),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset `{other}`; expected one of {}",
                    PRESET_CODES.join(", ")
                )))
            }
        };
        Ok(Self {
            oss_method,
            use_cgd,
            picker,
            ..base
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if self.use_cgd {
            self.cgd.validate()?;
        }
        match self.picker {
            PickerKind::Vpd => self.vpd.validate()?,
            PickerKind::Pp1 | PickerKind::Pp2 => self.effective_picker_params(0.01).validate()?,
        }
        if let Some(d) = self.pp_delta {
            if d.is_nan() || d < 0.0 {
                return Err(Error::InvalidConfig(format!("pp delta must be >= 0, got {d}")));
            }
        }
        if self.oss_method == OssMethod::Superflux {
            if self.superflux_mu == 0 {
                return Err(Error::InvalidConfig("superflux offset must be >= 1".into()));
            }
            if let Some(g) = self.superflux_log_mul {
                if !(g.is_finite() && g > 0.0) {
                    return Err(Error::InvalidConfig(format!("superflux log gain must be > 0, got {g}")));
                }
            }
            let fb = &self.filterbank;
            if fb.bands_per_octave == 0 || !(fb.fmin_hz > 0.0 && fb.fmax_hz > fb.fmin_hz) {
                return Err(Error::InvalidConfig(format!(
                    "invalid filterbank {}/{}..{} Hz",
                    fb.bands_per_octave, fb.fmin_hz, fb.fmax_hz
                )));
            }
        }
        Ok(())
    }

    /// PP1/PP2 parameters for a signal at `hop_seconds`.
    pub fn effective_picker_params(&self, hop_seconds: f64) -> PickerParams {
        let mut p = self.picker_params.unwrap_or(match self.picker {
            PickerKind::Pp1 => PickerParams::pp1_defaults(hop_seconds),
            _ => PickerParams::pp2_defaults(hop_seconds),
        });
        if let Some(d) = self.pp_delta {
            p.delta = d;
        }
        p
    }

    /// Estimate the onset strength signal, including the STFT.
    pub fn compute_oss(&self, audio: &AudioBuffer) -> Result<OnsetStrengthSignal> {
        match self.oss_method {
            OssMethod::ComplexDomain => oss_complex_domain(&stft(audio, &self.stft)?, self.cd_rectify),
            OssMethod::SpectralFlux => oss_spectral_flux(&stft_magnitude(audio, &self.stft)?),
            OssMethod::Stsa => oss_stsa(&stft_magnitude(audio, &self.stft)?),
            OssMethod::Superflux => {
                let mag = stft_magnitude(audio, &self.stft)?;
                let fb = LogFilterbank::new(mag.n_bins(), mag.bin_hz, mag.nyquist_hz(), &self.filterbank)?;
                let mut filtered = fb.apply(&mag);
                if let Some(g) = self.superflux_log_mul {
                    filtered = log_compress(&filtered, g);
                }
                oss_superflux(&filtered, self.superflux_mu, self.superflux_max_radius)
            }
            OssMethod::External => Err(Error::InvalidConfig(
                "the external method reads a precomputed OSS, not audio".into(),
            )),
        }
    }

    /// CGD smoothing when enabled, otherwise the input unchanged.
    pub fn smooth(&self, oss: OnsetStrengthSignal) -> Result<OnsetStrengthSignal> {
        if self.use_cgd {
            cgd_smooth(&oss, &self.cgd)
        } else {
            Ok(oss)
        }
    }

    /// Onset frame indices of an (optionally smoothed) OSS.
    pub fn pick(&self, oss: &OnsetStrengthSignal) -> Result<Vec<usize>> {
        match self.picker {
            PickerKind::Vpd => vpd_pick(oss, &self.vpd),
            PickerKind::Pp1 | PickerKind::Pp2 => {
                let params = self.effective_picker_params(oss.hop_seconds);
                let normalized;
                let input = if self.normalize_oss {
                    normalized = oss.with_values(zscore(&oss.values));
                    &normalized
                } else {
                    oss
                };
                if self.picker == PickerKind::Pp1 {
                    pp1_pick(input, &params)
                } else {
                    pp2_pick(input, &params)
                }
            }
        }
    }

    pub fn frames_to_onsets(&self, oss: &OnsetStrengthSignal, frames: &[usize]) -> Result<OnsetList> {
        let times = frames_to_times_with_offset(frames, oss.hop_seconds, oss.time_offset_seconds)?;
        OnsetList::new(times)
    }

    /// Smoothing and picking on an existing OSS.
    pub fn detect_from_oss(&self, oss: OnsetStrengthSignal) -> Result<OnsetList> {
        let smoothed = self.smooth(oss)?;
        let frames = self.pick(&smoothed)?;
        self.frames_to_onsets(&smoothed, &frames)
    }

    pub fn detect(&self, audio: &AudioBuffer) -> Result<OnsetList> {
        self.validate()?;
        self.detect_from_oss(self.compute_oss(audio)?)
    }
}

/// Detect onsets in a file. For the external method the path names an OSS
/// text file instead of audio.
pub fn run_detect(input: impl AsRef<Path>, config: &PipelineConfig) -> Result<OnsetList> {
    let input = input.as_ref();
    config.validate()?;
    let result = if config.oss_method == OssMethod::External {
        load_external_oss(input).and_then(|oss| config.detect_from_oss(oss))
    } else {
        load_audio(input).and_then(|audio| config.detect(&audio))
    };
    result.map_err(|e| match e {
        e @ (Error::FileNotFound(_) | Error::Io { .. } | Error::InFile { .. }) => e,
        other => other.in_file(input),
    })
}
