//! Short-time Fourier analysis and the superflux pre-processing stages.
//!
//! Frame `n` covers samples `[nH, nH + L)`. Only bins `0 .. n_fft/2` are kept,
//! i.e. DC up to (but excluding) Nyquist.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use realfft::{RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rect,
}

impl Window {
    /// Periodic window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 10.0,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn new(frame_ms: f64, hop_ms: f64) -> Self {
        Self {
            frame_ms,
            hop_ms,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.frame_ms.is_finite()
            && self.hop_ms.is_finite()
            && self.hop_ms > 0.0
            && self.hop_ms <= self.frame_ms;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "need 0 < hop_ms <= frame_ms, got frame_ms={} hop_ms={}",
                self.frame_ms, self.hop_ms
            )))
        }
    }

    /// Frame and hop length in samples at `sample_rate`.
    pub fn lengths(&self, sample_rate: u32) -> Result<(usize, usize)> {
        self.validate()?;
        let frame = (self.frame_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        if frame < 2 || hop == 0 {
            return Err(Error::InvalidConfig(format!(
                "frame of {frame} samples / hop of {hop} samples is degenerate at {sample_rate} Hz"
            )));
        }
        Ok((frame, hop.min(frame)))
    }
}

/// Complex STFT `X(n, k)`; rows are frames.
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub frames: Array2<Complex64>,
    pub hop_seconds: f64,
    /// Analysis frame duration, used to place frame timestamps at window centres.
    pub frame_seconds: f64,
    pub bin_hz: f64,
    pub n_fft: usize,
}

impl ComplexSpectrogram {
    /// Wrap an arbitrary grid (tests, external data). `n_fft` is taken as `2 * n_bins`.
    pub fn from_frames(frames: Array2<Complex64>, hop_seconds: f64) -> Self {
        let n_fft = 2 * frames.ncols();
        Self {
            frames,
            hop_seconds,
            frame_seconds: 0.0,
            bin_hz: 1.0,
            n_fft,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }
}

/// Non-negative magnitude grid; rows are frames, columns are bins or bands.
#[derive(Debug, Clone)]
pub struct MagnitudeSpectrogram {
    pub frames: Array2<f64>,
    pub hop_seconds: f64,
    pub frame_seconds: f64,
    pub bin_hz: f64,
    pub n_fft: usize,
    /// Present after [`log_filterbank`]; one centre frequency per column.
    pub band_centers_hz: Option<Vec<f64>>,
}

impl MagnitudeSpectrogram {
    pub fn from_frames(frames: Array2<f64>, hop_seconds: f64) -> Self {
        let n_fft = 2 * frames.ncols();
        Self {
            frames,
            hop_seconds,
            frame_seconds: 0.0,
            bin_hz: 1.0,
            n_fft,
            band_centers_hz: None,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.bin_hz * self.n_fft as f64 / 2.0
    }

    fn with_frames(&self, frames: Array2<f64>) -> Self {
        Self {
            frames,
            hop_seconds: self.hop_seconds,
            frame_seconds: self.frame_seconds,
            bin_hz: self.bin_hz,
            n_fft: self.n_fft,
            band_centers_hz: self.band_centers_hz.clone(),
        }
    }

    /// Debug dump, one frame per row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for row in self.frames.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

struct FrameTransform {
    fft: Arc<dyn RealToComplex<f64>>,
    window: Vec<f64>,
    frame: usize,
    hop: usize,
    n_frames: usize,
}

impl FrameTransform {
    fn new(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Self> {
        let (frame, hop) = cfg.lengths(audio.sample_rate)?;
        if audio.len() < frame {
            return Err(Error::AudioTooShort {
                needed: frame,
                got: audio.len(),
            });
        }
        let n_frames = (audio.len() - frame) / hop + 1;
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(frame);
        Ok(Self {
            fft,
            window: cfg.window.coefficients(frame),
            frame,
            hop,
            n_frames,
        })
    }

    fn n_bins(&self) -> usize {
        self.frame / 2
    }

    /// Transform frame `n` into `output` using caller-owned scratch buffers.
    fn transform(&self, samples: &[f64], n: usize, input: &mut [f64], output: &mut [Complex64]) {
        let start = n * self.hop;
        let chunk = &samples[start..start + self.frame];
        for ((dst, &s), &w) in input.iter_mut().zip(chunk).zip(&self.window) {
            *dst = s * w;
        }
        self.fft
            .process(input, output)
            .expect("buffer lengths come from the plan");
    }

    fn run(
        &self,
        samples: &[f64],
        n: usize,
        input: &mut [f64],
        output: &mut [Complex64],
        row: &mut [Complex64],
    ) {
        self.transform(samples, n, input, output);
        row.copy_from_slice(&output[..row.len()]);
    }

    fn finish(self, frames: Array2<Complex64>, sample_rate: u32) -> ComplexSpectrogram {
        let fs = sample_rate as f64;
        ComplexSpectrogram {
            frames,
            hop_seconds: self.hop as f64 / fs,
            frame_seconds: self.frame as f64 / fs,
            bin_hz: fs / self.frame as f64,
            n_fft: self.frame,
        }
    }
}

/// Short-time Fourier transform with `n_fft` equal to the frame length.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let t = FrameTransform::new(audio, cfg)?;
    let n_bins = t.n_bins();
    let mut frames = Array2::<Complex64>::zeros((t.n_frames, n_bins));
    let mut input = t.fft.make_input_vec();
    let mut output = t.fft.make_output_vec();
    for (n, mut row) in frames.rows_mut().into_iter().enumerate() {
        let row = row.as_slice_mut().expect("standard layout");
        t.run(&audio.samples, n, &mut input, &mut output, row);
    }
    Ok(t.finish(frames, audio.sample_rate))
}

/// Same as [`stft`], with frames transformed on the rayon pool. Output is identical.
pub fn stft_par(audio: &AudioBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let t = FrameTransform::new(audio, cfg)?;
    let n_bins = t.n_bins();
    let mut data = vec![Complex64::new(0.0, 0.0); t.n_frames * n_bins];
    data.par_chunks_mut(n_bins).enumerate().for_each_init(
        || (t.fft.make_input_vec(), t.fft.make_output_vec()),
        |(input, output), (n, row)| t.run(&audio.samples, n, input, output, row),
    );
    let frames = Array2::from_shape_vec((t.n_frames, n_bins), data).expect("shape matches");
    Ok(t.finish(frames, audio.sample_rate))
}

/// `magnitude(&stft(audio, cfg)?)` without materializing the complex frames.
pub fn stft_magnitude(audio: &AudioBuffer, cfg: &StftConfig) -> Result<MagnitudeSpectrogram> {
    let t = FrameTransform::new(audio, cfg)?;
    let n_bins = t.n_bins();
    let mut frames = Array2::<f64>::zeros((t.n_frames, n_bins));
    let mut input = t.fft.make_input_vec();
    let mut output = t.fft.make_output_vec();
    for (n, mut row) in frames.rows_mut().into_iter().enumerate() {
        t.transform(&audio.samples, n, &mut input, &mut output);
        for (dst, c) in row.iter_mut().zip(&output) {
            *dst = c.norm_sqr().sqrt();
        }
    }
    let fs = audio.sample_rate as f64;
    Ok(MagnitudeSpectrogram {
        frames,
        hop_seconds: t.hop as f64 / fs,
        frame_seconds: t.frame as f64 / fs,
        bin_hz: fs / t.frame as f64,
        n_fft: t.frame,
        band_centers_hz: None,
    })
}

/// Elementwise modulus.
pub fn magnitude(spec: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    MagnitudeSpectrogram {
        frames: spec.frames.mapv(|c| c.norm_sqr().sqrt()),
        hop_seconds: spec.hop_seconds,
        frame_seconds: spec.frame_seconds,
        bin_hz: spec.bin_hz,
        n_fft: spec.n_fft,
        band_centers_hz: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterbankConfig {
    pub bands_per_octave: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self {
            bands_per_octave: 24,
            fmin_hz: 30.0,
            fmax_hz: 17000.0,
        }
    }
}

/// `floor(bands_per_octave * log2(fmax / fmin))`.
pub fn band_count(bands_per_octave: usize, fmin_hz: f64, fmax_hz: f64) -> usize {
    (bands_per_octave as f64 * (fmax_hz / fmin_hz).log2()).floor() as usize
}

/// Triangular filters with logarithmically spaced, unit-peak responses.
#[derive(Debug, Clone)]
pub struct LogFilterbank {
    /// `n_bins x n_bands`, so that a spectrogram times this matrix gives band energies.
    pub weights: Array2<f64>,
    pub centers_hz: Vec<f64>,
}

impl LogFilterbank {
    pub fn new(n_bins: usize, bin_hz: f64, nyquist_hz: f64, cfg: &FilterbankConfig) -> Result<Self> {
        let FilterbankConfig {
            bands_per_octave: bpo,
            fmin_hz,
            fmax_hz,
        } = *cfg;
        let invalid = || Error::InvalidBandRange {
            fmin_hz,
            fmax_hz,
            nyquist_hz,
            bands_per_octave: bpo,
        };
        if bpo < 1
            || !(fmin_hz > 0.0)
            || !(fmin_hz < fmax_hz)
            || fmax_hz > nyquist_hz
            || n_bins == 0
        {
            return Err(invalid());
        }
        let n_bands = band_count(bpo, fmin_hz, fmax_hz);
        if n_bands == 0 {
            return Err(invalid());
        }

        let freq = |i: f64| fmin_hz * (i / bpo as f64).exp2();
        let centers_hz: Vec<f64> = (0..n_bands).map(|i| freq(i as f64)).collect();
        let mut weights = Array2::<f64>::zeros((n_bins, n_bands));
        for (band, &center) in centers_hz.iter().enumerate() {
            let lower = freq(band as f64 - 1.0);
            let upper = freq(band as f64 + 1.0);
            let mut column = weights.column_mut(band);
            for (k, w) in column.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > lower && f <= center {
                    (f - lower) / (center - lower)
                } else if f > center && f < upper {
                    (upper - f) / (upper - center)
                } else {
                    0.0
                };
            }
            let peak = column.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                column.mapv_inplace(|w| w / peak);
            } else {
                // band narrower than the bin spacing: fall back to the nearest bin
                let k = ((center / bin_hz).round() as usize).min(n_bins - 1);
                column[k] = 1.0;
            }
        }
        Ok(Self {
            weights,
            centers_hz,
        })
    }

    pub fn n_bands(&self) -> usize {
        self.centers_hz.len()
    }

    pub fn apply(&self, mag: &MagnitudeSpectrogram) -> MagnitudeSpectrogram {
        let mut out = mag.with_frames(mag.frames.dot(&self.weights));
        out.band_centers_hz = Some(self.centers_hz.clone());
        out
    }
}

/// Log-spaced triangular filterbank applied to every frame.
pub fn log_filterbank(
    mag: &MagnitudeSpectrogram,
    bands_per_octave: usize,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<MagnitudeSpectrogram> {
    let cfg = FilterbankConfig {
        bands_per_octave,
        fmin_hz,
        fmax_hz,
    };
    let fb = LogFilterbank::new(mag.n_bins(), mag.bin_hz, mag.nyquist_hz(), &cfg)?;
    Ok(fb.apply(mag))
}

/// Maximum over `[k - radius, k + radius]` along frequency, clamped at the edges.
/// A radius of 0 is the identity.
pub fn max_filter_freq(mag: &MagnitudeSpectrogram, radius: usize) -> MagnitudeSpectrogram {
    let n_bins = mag.n_bins();
    let mut out = mag.frames.clone();
    if radius > 0 {
        for (src, mut dst) in mag.frames.rows().into_iter().zip(out.rows_mut()) {
            for (k, d) in dst.iter_mut().enumerate() {
                let lo = k.saturating_sub(radius);
                let hi = (k + radius).min(n_bins - 1);
                *d = (lo..=hi).map(|j| src[j]).fold(f64::NEG_INFINITY, f64::max);
            }
        }
    }
    mag.with_frames(out)
}

/// `log10(mul * x + 1)` applied elementwise.
pub fn log_compress(mag: &MagnitudeSpectrogram, mul: f64) -> MagnitudeSpectrogram {
    mag.with_frames(mag.frames.mapv(|v| (mul * v).ln_1p() / std::f64::consts::LN_10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(freq: f64, fs: u32, len: usize) -> AudioBuffer {
        let samples = (0..len)
            .map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / fs as f64).sin())
            .collect();
        AudioBuffer::new(samples, fs).unwrap()
    }

    #[test]
    fn frame_count_formula() {
        let audio = AudioBuffer::new(vec![0.0; 44100], 44100).unwrap();
        let spec = stft(&audio, &StftConfig::new(40.0, 10.0)).unwrap();
        assert_eq!(spec.n_frames(), 97);
        assert_eq!(spec.n_fft, 1764);
        assert_eq!(spec.n_bins(), 882);
        assert!((spec.hop_seconds - 0.01).abs() < 1e-15);
        assert!(spec.frames.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn too_short_and_bad_config() {
        let audio = AudioBuffer::new(vec![0.0; 100], 44100).unwrap();
        assert!(matches!(
            stft(&audio, &StftConfig::default()),
            Err(Error::AudioTooShort { needed: 1764, got: 100 })
        ));
        assert!(matches!(
            stft(&audio, &StftConfig::new(10.0, 20.0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    /// Direct O(N^2) DFT of one rectangular-windowed frame.
    fn direct_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n / 2)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                    let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    acc + Complex64::from_polar(v, ang)
                })
            })
            .collect()
    }

    #[test]
    fn sinusoid_concentrates_in_one_bin() {
        // 2000-sample frames at 44.1 kHz give 22.05 Hz bins, so 441*m Hz is bin 20*m.
        let fs = 44100;
        let cfg = StftConfig {
            frame_ms: 2000.0 / 44.1,
            hop_ms: 10.0,
            window: Window::Rect,
        };
        for m in 1..=3 {
            let audio = sine(441.0 * m as f64, fs, 8000);
            let spec = stft(&audio, &cfg).unwrap();
            assert_eq!(spec.n_fft, 2000);
            let bin = 20 * m;
            for row in spec.frames.rows() {
                let total: f64 = row.iter().map(|c| c.norm_sqr()).sum();
                assert!(row[bin].norm_sqr() / total >= 0.9);
            }
            let oracle = direct_dft(&audio.samples[..2000]);
            for (a, b) in spec.frames.row(0).iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn hann_frame_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let audio = AudioBuffer::new(samples.clone(), 1000).unwrap();
        let cfg = StftConfig::new(64.0, 16.0);
        let spec = stft(&audio, &cfg).unwrap();
        let w = Window::Hann.coefficients(64);
        for n in [0, 3, spec.n_frames() - 1] {
            let frame: Vec<f64> = (0..64).map(|t| samples[n * 16 + t] * w[t]).collect();
            let oracle = direct_dft(&frame);
            for (a, b) in spec.frames.row(n).iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn stft_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let cfg = StftConfig::new(20.0, 5.0);
        let sa = stft(&AudioBuffer::new(a, 8000).unwrap(), &cfg).unwrap();
        let sb = stft(&AudioBuffer::new(b, 8000).unwrap(), &cfg).unwrap();
        let ss = stft(&AudioBuffer::new(sum, 8000).unwrap(), &cfg).unwrap();
        for ((x, y), z) in sa.frames.iter().zip(sb.frames.iter()).zip(ss.frames.iter()) {
            assert!((x + y - z).norm() < 1e-12);
        }
    }

    #[test]
    fn parallel_stft_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..20000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let audio = AudioBuffer::new(x, 16000).unwrap();
        let cfg = StftConfig::default();
        let a = stft(&audio, &cfg).unwrap();
        let b = stft_par(&audio, &cfg).unwrap();
        assert_eq!(a.frames, b.frames);
    }

    #[test]
    fn magnitude_basics() {
        let spec = ComplexSpectrogram::from_frames(
            array![[Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]],
            0.01,
        );
        let mag = magnitude(&spec);
        assert_eq!(mag.frames, array![[5.0, 0.0]]);
        assert_eq!(mag.hop_seconds, 0.01);

        let rotated = ComplexSpectrogram::from_frames(
            spec.frames.mapv(|c| c * Complex64::from_polar(1.0, 1.234)),
            0.01,
        );
        let mr = magnitude(&rotated);
        assert!((mr.frames[[0, 0]] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn band_count_matches_formula() {
        let expected = (24.0 * (17000.0f64 / 30.0).log2()).floor() as usize;
        assert_eq!(expected, 219);
        assert_eq!(band_count(24, 30.0, 17000.0), expected);
        let fb = LogFilterbank::new(882, 25.0, 22050.0, &FilterbankConfig::default()).unwrap();
        assert_eq!(fb.n_bands(), 219);
        assert!((fb.centers_hz[0] - 30.0).abs() < 1e-12);
        assert!(*fb.centers_hz.last().unwrap() < 17000.0);
    }

    #[test]
    fn filters_have_unit_peak() {
        let fb = LogFilterbank::new(882, 25.0, 22050.0, &FilterbankConfig::default()).unwrap();
        for col in fb.weights.columns() {
            let peak = col.iter().cloned().fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 1e-12);
            assert!(col.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn filterbank_linear_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = Array2::from_shape_fn((6, 882), |_| rng.random_range(0.0..1.0));
        let mut mag = MagnitudeSpectrogram::from_frames(frames, 0.01);
        mag.bin_hz = 25.0;
        mag.n_fft = 1764;
        let a = log_filterbank(&mag, 24, 30.0, 17000.0).unwrap();
        assert_eq!(a.n_frames(), 6);
        assert_eq!(a.band_centers_hz.as_ref().unwrap().len(), 219);
        let doubled = mag.with_frames(mag.frames.mapv(|v| 2.0 * v));
        let b = log_filterbank(&doubled, 24, 30.0, 17000.0).unwrap();
        for (x, y) in a.frames.iter().zip(b.frames.iter()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        let zero = mag.with_frames(Array2::zeros((6, 882)));
        let z = log_filterbank(&zero, 24, 30.0, 17000.0).unwrap();
        assert!(z.frames.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filterbank_band_range_errors() {
        let mut mag = MagnitudeSpectrogram::from_frames(Array2::zeros((2, 882)), 0.01);
        mag.bin_hz = 25.0;
        mag.n_fft = 1764;
        for (bpo, lo, hi) in [(24, 100.0, 50.0), (24, 30.0, 30000.0), (0, 30.0, 17000.0), (24, 0.0, 100.0)] {
            assert!(matches!(
                log_filterbank(&mag, bpo, lo, hi),
                Err(Error::InvalidBandRange { .. })
            ));
        }
    }

    #[test]
    fn max_filter_examples() {
        let m = MagnitudeSpectrogram::from_frames(array![[0.0, 1.0, 0.0], [2.0, 2.0, 2.0]], 0.01);
        let f = max_filter_freq(&m, 1);
        assert_eq!(f.frames, array![[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]);
        assert_eq!(max_filter_freq(&m, 0).frames, m.frames);
    }

    #[test]
    fn max_filter_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let frames = Array2::from_shape_fn((5, 8), |_| rng.random_range(0.0..1.0));
            let m = MagnitudeSpectrogram::from_frames(frames.clone(), 0.01);
            for radius in 1..4usize {
                let f = max_filter_freq(&m, radius);
                for n in 0..5 {
                    for k in 0..8i64 {
                        let mut best = f64::NEG_INFINITY;
                        for j in (k - radius as i64)..=(k + radius as i64) {
                            if (0..8).contains(&j) {
                                best = best.max(frames[[n, j as usize]]);
                            }
                        }
                        assert_eq!(f.frames[[n, k as usize]], best);
                    }
                }
            }
        }
    }

    #[test]
    fn max_filter_composition_on_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let frames = Array2::from_shape_fn((4, 16), |_| rng.random_range(0.0..1.0));
        let m = MagnitudeSpectrogram::from_frames(frames, 0.01);
        let once = max_filter_freq(&m, 1);
        let twice = max_filter_freq(&once, 1);
        let wide = max_filter_freq(&m, 2);
        for n in 0..4 {
            for k in 2..14 {
                assert_eq!(twice.frames[[n, k]], wide.frames[[n, k]]);
            }
            for k in 0..16 {
                assert!(once.frames[[n, k]] >= m.frames[[n, k]]);
            }
        }
    }

    #[test]
    fn log_compress_values() {
        let m = MagnitudeSpectrogram::from_frames(array![[0.0, 9.0], [99.0, 4.5]], 0.01);
        let l = log_compress(&m, 1.0);
        assert!((l.frames[[0, 1]] - 1.0).abs() < 1e-12);
        assert!((l.frames[[1, 0]] - 2.0).abs() < 1e-12);
        assert_eq!(l.frames[[0, 0]], 0.0);
        assert!((log_compress(&m, 2.0).frames[[1, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnitude_only_path_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..9000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let audio = AudioBuffer::new(samples, 22050).unwrap();
        let cfg = StftConfig::new(40.0, 10.0);
        let a = magnitude(&stft(&audio, &cfg).unwrap());
        let b = stft_magnitude(&audio, &cfg).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!((a.hop_seconds, a.frame_seconds, a.bin_hz, a.n_fft), (b.hop_seconds, b.frame_seconds, b.bin_hz, b.n_fft));
    }
}
