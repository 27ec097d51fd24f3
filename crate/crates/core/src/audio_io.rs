//! Audio decoding and external onset-strength import.
//!
//! WAV files are decoded to a mono `f64` buffer at their native sample rate.
//! Multichannel input is downmixed by taking the arithmetic mean of the
//! channels, and integer PCM is scaled by `2^(bits-1)`.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::oss::OnsetStrengthSignal;

/// Mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported WAV variant".into()),
        hound::Error::FormatError(msg) => Error::UnsupportedEncoding(msg.to_string()),
        other => Error::UnsupportedEncoding(other.to_string()),
    }
}

/// Decode a PCM WAV file (16/24/32-bit integer or 32-bit float) to mono.
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedEncoding("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };

    let samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    if samples.is_empty() {
        return Err(Error::EmptyStream);
    }
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Write a mono buffer as 32-bit float WAV. Samples are narrowed to `f32`.
pub fn write_wav_f32(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &audio.samples {
        writer
            .write_sample(s as f32)
            .map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// Parse the external OSS text format: a `hop_seconds=<decimal>` header
/// followed by one value per line.
pub fn parse_external_oss(text: &str) -> Result<OnsetStrengthSignal> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));

    let header = lines.next().ok_or(Error::EmptyStream)?;
    let hop_seconds = header
        .trim()
        .strip_prefix("hop_seconds=")
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|h| h.is_finite() && *h > 0.0)
        .ok_or_else(|| Error::MalformedHeader(header.to_string()))?;

    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::NonNumericLine {
                line: idx + 2,
                content: line.to_string(),
            })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(OnsetStrengthSignal::new(values, hop_seconds))
}

/// Load an onset strength signal computed outside this crate.
pub fn load_external_oss(path: impl AsRef<Path>) -> Result<OnsetStrengthSignal> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_oss(&text)
}
