//! Per-stage wall-clock timing of a detection pipeline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::eval::OnsetList;
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// STFT plus the onset strength estimator.
    Oss,
    Smoothing,
    PeakPicking,
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub median_ms: f64,
    pub repeats: usize,
    /// Individual repeat durations.
    pub samples_ms: Vec<f64>,
}

impl StageTiming {
    fn from_samples(stage: Stage, samples_ms: Vec<f64>) -> Self {
        let n = samples_ms.len();
        let mean_ms = samples_ms.iter().sum::<f64>() / n as f64;
        let mut sorted = samples_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let median_ms = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Self {
            stage,
            // summation order can nudge the mean outside [min, max] by an ulp
            mean_ms: mean_ms.clamp(sorted[0], sorted[n - 1]),
            min_ms: sorted[0],
            max_ms: sorted[n - 1],
            median_ms,
            repeats: n,
            samples_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub stages: Vec<StageTiming>,
    /// Output of the last timed repeat.
    pub onsets: OnsetList,
}

impl BenchReport {
    pub fn stage(&self, stage: Stage) -> &StageTiming {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .expect("every stage is reported")
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Run `warmup` untimed iterations and then `repeats` timed ones. Total is
/// the per-repeat sum of the three stages.
pub fn time_pipeline(
    audio: &AudioBuffer,
    config: &PipelineConfig,
    repeats: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    config.validate()?;
    let mut oss_ms = Vec::with_capacity(repeats);
    let mut smooth_ms = Vec::with_capacity(repeats);
    let mut pick_ms = Vec::with_capacity(repeats);
    let mut onsets = OnsetList::default();

    for i in 0..warmup + repeats {
        let t = Instant::now();
        let oss = config.compute_oss(audio)?;
        let a = elapsed_ms(t);

        let t = Instant::now();
        let smoothed = config.smooth(oss)?;
        let b = elapsed_ms(t);

        let t = Instant::now();
        let frames = config.pick(&smoothed)?;
        let c = elapsed_ms(t);

        if i >= warmup {
            oss_ms.push(a);
            smooth_ms.push(b);
            pick_ms.push(c);
            onsets = config.frames_to_onsets(&smoothed, &frames)?;
        }
    }

    let total_ms = (0..repeats)
        .map(|i| oss_ms[i] + smooth_ms[i] + pick_ms[i])
        .collect();
    Ok(BenchReport {
        stages: vec![
            StageTiming::from_samples(Stage::Oss, oss_ms),
            StageTiming::from_samples(Stage::Smoothing, smooth_ms),
            StageTiming::from_samples(Stage::PeakPicking, pick_ms),
            StageTiming::from_samples(Stage::Total, total_ms),
        ],
        onsets,
    })
}
