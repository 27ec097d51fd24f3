//! Seeded test signals with known onset times.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio_io::AudioBuffer;
use crate::error::Result;

use std::f64::consts::PI;

/// Amplitude of a level given in dB relative to full scale.
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Gaussian white noise with standard deviation `amplitude`.
pub fn white_noise(n_samples: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            amplitude * z
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickTrainConfig {
    pub sample_rate: u32,
    pub n_clicks: usize,
    pub first_onset_s: f64,
    pub spacing_s: f64,
    /// Level of the white-noise floor in dB relative to full scale.
    pub noise_db: f64,
    /// Time constant of the exponential decay after each impulse.
    pub decay_s: f64,
    /// Frequency of the decaying partial that follows each impulse.
    pub ring_hz: f64,
    /// Silence (apart from noise) after the last click.
    pub tail_s: f64,
    pub seed: u64,
}

impl Default for ClickTrainConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44100,
            n_clicks: 10,
            first_onset_s: 0.25,
            spacing_s: 0.5,
            noise_db: -30.0,
            decay_s: 0.02,
            ring_hz: 1000.0,
            tail_s: 0.5,
            seed: 7,
        }
    }
}

/// Impulses followed by an exponentially decaying partial, over white noise.
/// Returns the audio and the exact onset times.
pub fn click_train(cfg: &ClickTrainConfig) -> Result<(AudioBuffer, Vec<f64>)> {
    let fs = cfg.sample_rate as f64;
    let times: Vec<f64> = (0..cfg.n_clicks)
        .map(|i| cfg.first_onset_s + i as f64 * cfg.spacing_s)
        .collect();
    let duration = times.last().copied().unwrap_or(cfg.first_onset_s) + cfg.tail_s;
    let len = (duration * fs).round() as usize;
    let mut samples = white_noise(len, db_to_amplitude(cfg.noise_db), cfg.seed);

    let event_len = ((8.0 * cfg.decay_s).max(0.001) * fs).round() as usize;
    for &t in &times {
        let start = (t * fs).round() as usize;
        for n in 0..event_len.min(len.saturating_sub(start)) {
            let tn = n as f64 / fs;
            let mut v = (-tn / cfg.decay_s).exp() * (2.0 * PI * cfg.ring_hz * tn).sin();
            if n == 0 {
                v += 1.0;
            }
            samples[start + n] += v;
        }
    }
    Ok((AudioBuffer::new(samples, cfg.sample_rate)?, times))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibratoToneConfig {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub onset_s: f64,
    pub carrier_hz: f64,
    pub vibrato_hz: f64,
    pub depth_semitones: f64,
    pub amplitude: f64,
    /// Linear fade-in length at the attack.
    pub attack_s: f64,
}

impl Default for VibratoToneConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44100,
            duration_s: 2.0,
            onset_s: 0.25,
            carrier_hz: 440.0,
            vibrato_hz: 6.0,
            depth_semitones: 1.0,
            amplitude: 0.5,
            attack_s: 0.005,
        }
    }
}

/// A sustained tone with sinusoidal frequency modulation and a single attack.
/// The instantaneous frequency is `f0 * 2^(d/12 * sin(2 pi fv t))`.
pub fn vibrato_tone(cfg: &VibratoToneConfig) -> Result<(AudioBuffer, Vec<f64>)> {
    let fs = cfg.sample_rate as f64;
    let len = (cfg.duration_s * fs).round() as usize;
    let start = (cfg.onset_s * fs).round() as usize;
    let mut samples = vec![0.0; len];
    let mut phase = 0.0f64;
    for (n, s) in samples.iter_mut().enumerate().skip(start) {
        let t = (n - start) as f64 / fs;
        let f = cfg.carrier_hz * 2f64.powf(cfg.depth_semitones / 12.0 * (2.0 * PI * cfg.vibrato_hz * t).sin());
        let env = if cfg.attack_s > 0.0 { (t / cfg.attack_s).min(1.0) } else { 1.0 };
        *s = cfg.amplitude * env * phase.sin();
        phase += 2.0 * PI * f / fs;
    }
    Ok((AudioBuffer::new(samples, cfg.sample_rate)?, vec![cfg.onset_s]))
}
