//! Chirp group delay smoothing of an onset strength signal.
//!
//! The OSS `O(k)`, `k = 0..K`, is read as the positive-frequency half of a
//! magnitude spectrum. It is mirrored to a length-`2K` spectrum
//! `X(k) = O(2K-1-k)` for `k >= K`, inverted, and the first `K` samples of the
//! resulting sequence are kept as its causal part. That causal part is damped by
//! `r^-n` (equivalently, its z-transform is evaluated on the circle `|z| = r`)
//! and the group delay of the result is returned for the first `K` bins.
//!
//! The half-sample mirror makes the inverse transform equal to a real, even
//! cosine series times `exp(-j*pi*n/2K)`. The causal part is kept complex, and
//! evaluating its spectrum on the plain `2K` grid is then the same as
//! evaluating the real cosine series half a bin later, which lines bin `k` of
//! the output up with `O(k)`.
//!
//! Group delay is computed from the identity
//! `tau(w) = Re{ X(w) * conj(Y(w)) } / |X(w)|^2`, where `Y` is the transform of
//! `n * x(n)`. No phase unwrapping is involved.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oss::OnsetStrengthSignal;

/// Bins whose power falls below this fraction of the peak power emit 0.
pub const POWER_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgdConfig {
    /// Radius of the evaluation circle; must be strictly greater than 1.
    pub radius: f64,
}

impl Default for CgdConfig {
    fn default() -> Self {
        Self { radius: 1.010 }
    }
}

impl CgdConfig {
    pub fn new(radius: f64) -> Result<Self> {
        let cfg = Self { radius };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius.is_finite() && self.radius > 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "chirp radius must be > 1, got {}",
                self.radius
            )))
        }
    }
}

/// Intermediate sequences of one smoothing run, kept for inspection.
#[derive(Debug, Clone)]
pub struct CgdTrace {
    /// Inverse transform of the mirrored OSS (length `2K`).
    pub signal: Vec<Complex64>,
    /// First `K` samples of `signal`.
    pub causal: Vec<Complex64>,
    /// Group delay over all `2K` bins.
    pub group_delay: Vec<f64>,
}

impl CgdTrace {
    /// Debug dump as `index,value` rows. Complex sequences are written as their real part.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let write = |name: &str, values: &mut dyn Iterator<Item = f64>| -> Result<()> {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = std::io::BufWriter::new(file);
            writeln!(out, "index,value").map_err(|e| Error::io(&path, e))?;
            for (i, v) in values.enumerate() {
                writeln!(out, "{i},{v}").map_err(|e| Error::io(&path, e))?;
            }
            out.flush().map_err(|e| Error::io(&path, e))
        };
        write("cgd_signal.csv", &mut self.signal.iter().map(|c| c.re))?;
        write("cgd_causal.csv", &mut self.causal.iter().map(|c| c.re))?;
        write("cgd_group_delay.csv", &mut self.group_delay.iter().copied())
    }
}

struct ChirpKernel {
    fft: Arc<dyn Fft<f64>>,
}

impl ChirpKernel {
    fn new(planner: &mut FftPlanner<f64>, n_points: usize) -> Self {
        Self {
            fft: planner.plan_fft_forward(n_points),
        }
    }

    fn group_delay(&self, signal: &[Complex64], radius: f64) -> Vec<f64> {
        let n_points = self.fft.len();
        let log_r = radius.ln();
        let mut damped = vec![Complex64::new(0.0, 0.0); n_points];
        let mut ramped = vec![Complex64::new(0.0, 0.0); n_points];
        for (n, &x) in signal.iter().enumerate() {
            let w = x * (-(n as f64) * log_r).exp();
            damped[n] = w;
            ramped[n] = w * n as f64;
        }
        self.fft.process(&mut damped);
        self.fft.process(&mut ramped);

        let power: Vec<f64> = damped.iter().map(|c| c.norm_sqr()).collect();
        let floor = POWER_GUARD * power.iter().cloned().fold(0.0, f64::max);
        damped
            .iter()
            .zip(&ramped)
            .zip(&power)
            .map(|((x, y), &p)| {
                if p > 0.0 && p >= floor {
                    (x * y.conj()).re / p
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Group delay of `signal` evaluated on `n_points` equally spaced points of
/// the circle `|z| = radius`. Values are in samples.
pub fn chirp_group_delay(signal: &[f64], radius: f64, n_points: usize) -> Result<Vec<f64>> {
    let complex: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    chirp_group_delay_complex(&complex, radius, n_points)
}

/// [`chirp_group_delay`] for a complex sequence.
pub fn chirp_group_delay_complex(
    signal: &[Complex64],
    radius: f64,
    n_points: usize,
) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidConfig(format!("radius must be > 0, got {radius}")));
    }
    if n_points < signal.len() {
        return Err(Error::InvalidConfig(format!(
            "n_points ({n_points}) must be at least the signal length ({})",
            signal.len()
        )));
    }
    let mut planner = FftPlanner::new();
    Ok(ChirpKernel::new(&mut planner, n_points).group_delay(signal, radius))
}

/// Smooth an OSS by replacing it with the chirp group delay of the signal whose
/// magnitude spectrum it is taken to be.
pub fn cgd_smooth(oss: &OnsetStrengthSignal, cfg: &CgdConfig) -> Result<OnsetStrengthSignal> {
    cgd_trace(oss, cfg).map(|(out, _)| out)
}

/// [`cgd_smooth`] that also returns the intermediate sequences.
pub fn cgd_trace(
    oss: &OnsetStrengthSignal,
    cfg: &CgdConfig,
) -> Result<(OnsetStrengthSignal, CgdTrace)> {
    cfg.validate()?;
    let k = oss.len();
    if k < 2 {
        return Err(Error::TooShort { needed: 2, got: k });
    }
    if oss.values.iter().all(|&v| v == 0.0) {
        let trace = CgdTrace {
            signal: vec![Complex64::new(0.0, 0.0); 2 * k],
            causal: vec![Complex64::new(0.0, 0.0); k],
            group_delay: vec![0.0; 2 * k],
        };
        return Ok((oss.with_values(vec![0.0; k]), trace));
    }

    let n = 2 * k;
    let mut planner = FftPlanner::new();
    let mut spectrum: Vec<Complex64> = oss
        .values
        .iter()
        .chain(oss.values.iter().rev())
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    planner.plan_fft_inverse(n).process(&mut spectrum);
    let scale = 1.0 / n as f64;
    let signal: Vec<Complex64> = spectrum.into_iter().map(|c| c * scale).collect();
    let causal = signal[..k].to_vec();

    let group_delay = ChirpKernel::new(&mut planner, n).group_delay(&causal, cfg.radius);
    let out = oss.with_values(group_delay[..k].to_vec());
    Ok((
        out,
        CgdTrace {
            signal,
            causal,
            group_delay,
        },
    ))
}
