//! Dataset evaluation and parameter sweeps over a manifest of files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{load_audio, load_external_oss};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, aggregate_micro, compute_metrics, match_onsets, parse_annotations, MatchResult,
    Metrics, OnsetList,
};
use crate::oss::OnsetStrengthSignal;
use crate::pipeline::{OssMethod, PickerKind, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Audio file, or an OSS text file for the external method.
    pub input: PathBuf,
    pub annotation: PathBuf,
}

/// Parse `input<TAB>annotation` lines. Blank lines and `#` comments are
/// skipped; relative paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(Error::ManifestMalformed {
                line: idx + 1,
                reason: format!("expected 2 tab-separated paths, found {}", fields.len()),
            });
        }
        let resolve = |f: &str| {
            let p = PathBuf::from(f.trim());
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        entries.push(ManifestEntry {
            input: resolve(fields[0]),
            annotation: resolve(fields[1]),
        });
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub path: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub tolerance_s: f64,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub files: Vec<FileScore>,
    pub errors: Vec<FileError>,
    /// Mean of per-file metrics; absent when no file could be scored.
    #[serde(rename = "macro")]
    pub macro_avg: Option<Metrics>,
    /// Metrics of the pooled counts.
    #[serde(rename = "micro")]
    pub micro_avg: Option<Metrics>,
    pub params: EvalParams,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for f in &self.files {
            w.serialize(f)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

/// Input of one manifest row, loaded once and reused across configurations.
enum LoadedInput {
    Audio(crate::AudioBuffer),
    Oss(OnsetStrengthSignal),
}

fn load_input(path: &Path, method: OssMethod) -> Result<LoadedInput> {
    if method == OssMethod::External {
        load_external_oss(path).map(LoadedInput::Oss)
    } else {
        load_audio(path).map(LoadedInput::Audio)
    }
}

fn load_row(entry: &ManifestEntry, method: OssMethod) -> Result<(LoadedInput, OnsetList)> {
    let input = load_input(&entry.input, method).map_err(|e| e.in_file(&entry.input))?;
    let reference = parse_annotations(&entry.annotation)?;
    Ok((input, reference))
}

fn detect_loaded(input: &LoadedInput, config: &PipelineConfig) -> Result<OnsetList> {
    match input {
        LoadedInput::Audio(audio) => config.detect(audio),
        LoadedInput::Oss(oss) => config.detect_from_oss(oss.clone()),
    }
}

fn summarize(
    results: Vec<(String, Result<MatchResult>)>,
    params: EvalParams,
) -> EvalReport {
    let mut files = Vec::new();
    let mut errors = Vec::new();
    let mut matches = Vec::new();
    for (path, r) in results {
        match r {
            Ok(m) => {
                let metrics = compute_metrics(&m);
                files.push(FileScore {
                    path,
                    tp: m.tp,
                    fp: m.fp,
                    fn_: m.fn_,
                    precision: metrics.precision,
                    recall: metrics.recall,
                    f1: metrics.f1,
                });
                matches.push(m);
            }
            Err(e) => errors.push(FileError {
                path,
                error: e.to_string(),
            }),
        }
    }
    let per_file: Vec<Metrics> = files
        .iter()
        .map(|f| Metrics {
            precision: f.precision,
            recall: f.recall,
            f1: f.f1,
        })
        .collect();
    EvalReport {
        files,
        errors,
        macro_avg: aggregate(&per_file).ok(),
        micro_avg: aggregate_micro(&matches).ok(),
        params,
    }
}

/// Detect and score every manifest row. Per-file failures are recorded in
/// the report; only an unreadable or malformed manifest is an error. Rows are
/// processed in parallel and reported in manifest order.
pub fn evaluate_entries(
    entries: &[ManifestEntry],
    config: &PipelineConfig,
    tolerance_s: f64,
) -> Result<EvalReport> {
    config.validate()?;
    check_tolerance(tolerance_s)?;
    let results: Vec<(String, Result<MatchResult>)> = entries
        .par_iter()
        .map(|entry| {
            let r = load_row(entry, config.oss_method).and_then(|(input, reference)| {
                let detected = detect_loaded(&input, config).map_err(|e| e.in_file(&entry.input))?;
                Ok(match_onsets(&reference, &detected, tolerance_s))
            });
            (entry.input.display().to_string(), r)
        })
        .collect();
    Ok(summarize(
        results,
        EvalParams {
            tolerance_s,
            config: config.clone(),
        },
    ))
}

pub fn run_evaluate(
    manifest_path: impl AsRef<Path>,
    config: &PipelineConfig,
    tolerance_s: f64,
) -> Result<EvalReport> {
    let entries = load_manifest(manifest_path)?;
    evaluate_entries(&entries, config, tolerance_s)
}

fn check_tolerance(tolerance_s: f64) -> Result<()> {
    if tolerance_s.is_finite() && tolerance_s > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "tolerance must be > 0, got {tolerance_s}"
        )))
    }
}

/// Values tried by [`run_sweep`]. Parameters that do not apply to the base
/// configuration (CGD radius without smoothing, VPD scale with PP1/PP2 and
/// the reverse, frame sizes with an external OSS) are held at the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub frame_ms: Vec<f64>,
    pub hop_ms: Vec<f64>,
    pub cgd_radius: Vec<f64>,
    pub vpd_mu: Vec<f64>,
    pub pp_delta: Vec<f64>,
}

fn stepped(start: f64, step: f64, count: usize) -> Vec<f64> {
    // rounding keeps the printed values clean, e.g. 1.003 rather than 1.0030000000000001
    (0..count)
        .map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6)
        .collect()
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            frame_ms: vec![20.0, 40.0],
            hop_ms: vec![5.0, 10.0],
            cgd_radius: stepped(1.001, 0.001, 20),
            vpd_mu: stepped(0.75, 0.05, 6),
            pp_delta: stepped(0.1, 0.1, 20),
        }
    }
}

impl SweepGrid {
    /// Every grid point applied to `base`, in nested order frame, hop,
    /// radius, picker threshold.
    pub fn points(&self, base: &PipelineConfig) -> Result<Vec<PipelineConfig>> {
        let external = base.oss_method == OssMethod::External;
        let frames = if external { vec![base.stft.frame_ms] } else { self.frame_ms.clone() };
        let hops = if external { vec![base.stft.hop_ms] } else { self.hop_ms.clone() };
        let radii = if base.use_cgd { self.cgd_radius.clone() } else { vec![base.cgd.radius] };
        let thresholds = match base.picker {
            PickerKind::Vpd => &self.vpd_mu,
            PickerKind::Pp1 | PickerKind::Pp2 => &self.pp_delta,
        };
        if [&frames, &hops, &radii, thresholds].iter().any(|v| v.is_empty()) {
            return Err(Error::EmptyGrid);
        }
        let mut out = Vec::new();
        for &frame_ms in &frames {
            for &hop_ms in &hops {
                for &radius in &radii {
                    for &th in thresholds {
                        let mut cfg = base.clone();
                        cfg.stft.frame_ms = frame_ms;
                        cfg.stft.hop_ms = hop_ms;
                        cfg.cgd.radius = radius;
                        match base.picker {
                            PickerKind::Vpd => cfg.vpd.mu_scale = th,
                            _ => cfg.pp_delta = Some(th),
                        }
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: PipelineConfig,
    #[serde(rename = "macro")]
    pub macro_avg: Metrics,
    #[serde(rename = "micro")]
    pub micro_avg: Metrics,
    /// Files whose detection failed at this point; they score zero.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: SweepRow,
    pub table: Vec<SweepRow>,
    /// Rows of the manifest that could not be loaded at all.
    pub errors: Vec<FileError>,
}

impl SweepResult {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record([
            "frame_ms", "hop_ms", "cgd_radius", "vpd_mu", "pp_delta", "precision", "recall",
            "f1", "micro_precision", "micro_recall", "micro_f1", "failures",
        ])?;
        for row in &self.table {
            let c = &row.config;
            let pp_delta = c.pp_delta.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([
                c.stft.frame_ms.to_string(),
                c.stft.hop_ms.to_string(),
                c.cgd.radius.to_string(),
                c.vpd.mu_scale.to_string(),
                pp_delta,
                row.macro_avg.precision.to_string(),
                row.macro_avg.recall.to_string(),
                row.macro_avg.f1.to_string(),
                row.micro_avg.precision.to_string(),
                row.micro_avg.recall.to_string(),
                row.micro_avg.f1.to_string(),
                row.failures.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Per-file match results for every grid point, reusing OSS and smoothing
/// results across points that share them.
fn sweep_file(
    input: &LoadedInput,
    reference: &OnsetList,
    points: &[PipelineConfig],
    tolerance_s: f64,
) -> Vec<Option<MatchResult>> {
    let mut oss_cache: BTreeMap<(u64, u64), Result<OnsetStrengthSignal>> = BTreeMap::new();
    let mut smooth_key = None;
    let mut smoothed: Result<OnsetStrengthSignal> = Err(Error::EmptySignal);
    points
        .iter()
        .map(|cfg| {
            let key = (cfg.stft.frame_ms.to_bits(), cfg.stft.hop_ms.to_bits());
            let oss = oss_cache.entry(key).or_insert_with(|| match input {
                LoadedInput::Audio(a) => cfg.compute_oss(a),
                LoadedInput::Oss(o) => Ok(o.clone()),
            });
            let skey = (key, cfg.cgd.radius.to_bits());
            if smooth_key != Some(skey) {
                smoothed = match oss {
                    Ok(o) => cfg.smooth(o.clone()),
                    Err(e) => Err(Error::InvalidConfig(e.to_string())),
                };
                smooth_key = Some(skey);
            }
            let s = smoothed.as_ref().ok()?;
            let frames = cfg.pick(s).ok()?;
            let detected = cfg.frames_to_onsets(s, &frames).ok()?;
            Some(match_onsets(reference, &detected, tolerance_s))
        })
        .collect()
}

fn config_key(cfg: &PipelineConfig) -> String {
    serde_json::to_string(cfg).unwrap_or_default()
}

/// Evaluate every grid point and return the one with the best macro F1.
/// Ties go to higher precision, then to the lexicographically smallest
/// configuration JSON.
pub fn sweep_entries(
    entries: &[ManifestEntry],
    base: &PipelineConfig,
    grid: &SweepGrid,
    tolerance_s: f64,
) -> Result<SweepResult> {
    check_tolerance(tolerance_s)?;
    let points = grid.points(base)?;
    for p in &points {
        p.validate()?;
    }

    #[allow(clippy::type_complexity)]
    let per_file: Vec<(String, Result<(Vec<Option<MatchResult>>, usize)>)> = entries
        .par_iter()
        .map(|entry| {
            let r = load_row(entry, base.oss_method)
                .map(|(input, reference)| {
                    let results = sweep_file(&input, &reference, &points, tolerance_s);
                    (results, reference.len())
                });
            (entry.input.display().to_string(), r)
        })
        .collect();

    let mut errors = Vec::new();
    let mut scored: Vec<(Vec<Option<MatchResult>>, usize)> = Vec::new();
    for (path, r) in per_file {
        match r {
            Ok(v) => scored.push(v),
            Err(e) => errors.push(FileError {
                path,
                error: e.to_string(),
            }),
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptyList);
    }

    let table: Vec<SweepRow> = points
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mut failures = 0;
            let matches: Vec<MatchResult> = scored
                .iter()
                .map(|(results, n_ref)| {
                    results[i].clone().unwrap_or_else(|| {
                        failures += 1;
                        MatchResult {
                            tp: 0,
                            fp: 0,
                            fn_: *n_ref,
                            pairs: Vec::new(),
                        }
                    })
                })
                .collect();
            let metrics: Vec<Metrics> = matches.iter().map(compute_metrics).collect();
            SweepRow {
                config: cfg.clone(),
                macro_avg: aggregate(&metrics).unwrap_or_default(),
                micro_avg: aggregate_micro(&matches).unwrap_or_default(),
                failures,
            }
        })
        .collect();

    let best = table
        .iter()
        .min_by(|a, b| {
            b.macro_avg
                .f1
                .total_cmp(&a.macro_avg.f1)
                .then(b.macro_avg.precision.total_cmp(&a.macro_avg.precision))
                .then_with(|| config_key(&a.config).cmp(&config_key(&b.config)))
        })
        .cloned()
        .ok_or(Error::EmptyGrid)?;
    Ok(SweepResult {
        best,
        table,
        errors,
    })
}

pub fn run_sweep(
    manifest_path: impl AsRef<Path>,
    base: &PipelineConfig,
    grid: &SweepGrid,
    tolerance_s: f64,
) -> Result<SweepResult> {
    let entries = load_manifest(manifest_path)?;
    sweep_entries(&entries, base, grid, tolerance_s)
}
