//! `onsetlab` command line: detect, evaluate, sweep, bench, convert-annotations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use onsetlab::bench::time_pipeline;
use onsetlab::convert::{convert_annotation_file, AnnotationMapping};
use onsetlab::eval::DEFAULT_TOLERANCE_S;
use onsetlab::experiment::{run_evaluate, run_sweep, SweepGrid};
use onsetlab::{load_audio, run_detect, Error, OssMethod, PickerKind, PipelineConfig, Result};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "onsetlab", version, about = "Music onset detection and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print onset times (seconds, one per line) for an audio file, or for an
    /// OSS text file with `--oss external`.
    Detect {
        input: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Score detections against annotations listed in a manifest
    /// (`audio<TAB>annotation` per line).
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE_S)]
        tolerance_s: f64,
        #[arg(long)]
        json_out: Option<PathBuf>,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Grid search for the configuration with the best macro F1.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// JSON grid; missing lists take their default values.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE_S)]
        tolerance_s: f64,
        #[arg(long)]
        json_out: Option<PathBuf>,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Per-stage timing of one pipeline on one audio file.
    Bench {
        input: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Convert a dataset annotation file to the plain onset-list format.
    ConvertAnnotations {
        input: PathBuf,
        /// JSON field mapping, e.g. `{"format":"xml_tag","tag":"onsetSec"}`.
        #[arg(long)]
        mapping: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON configuration file. Flags given alongside it take precedence.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration: 1001, 1012, 2101, 2112, 3100, 4012 (default) or 5000.
    #[arg(long)]
    preset: Option<String>,
    /// complex_domain, spectral_flux, superflux, stsa or external.
    #[arg(long)]
    oss: Option<String>,
    /// Enable or disable chirp group delay smoothing.
    #[arg(long)]
    cgd: Option<bool>,
    #[arg(long)]
    cgd_radius: Option<f64>,
    /// vpd, pp1 or pp2.
    #[arg(long)]
    picker: Option<String>,
    #[arg(long)]
    vpd_mu: Option<f64>,
    /// Threshold of the pp1/pp2 pickers.
    #[arg(long)]
    pp_delta: Option<f64>,
    /// Frame offset of the superflux difference.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    superflux_mu: Option<u8>,
    #[arg(long)]
    frame_ms: Option<f64>,
    #[arg(long)]
    hop_ms: Option<f64>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => read_json(path)?,
            (None, Some(code)) => PipelineConfig::preset(code)?,
            (None, None) => PipelineConfig::preset("4012")?,
        };
        if let Some(m) = &self.oss {
            cfg.oss_method = m.parse::<OssMethod>()?;
        }
        if let Some(p) = &self.picker {
            cfg.picker = p.parse::<PickerKind>()?;
        }
        if let Some(b) = self.cgd {
            cfg.use_cgd = b;
        }
        if let Some(r) = self.cgd_radius {
            cfg.cgd.radius = r;
        }
        if let Some(mu) = self.vpd_mu {
            cfg.vpd.mu_scale = mu;
        }
        if let Some(d) = self.pp_delta {
            cfg.pp_delta = Some(d);
        }
        if let Some(m) = self.superflux_mu {
            cfg.superflux_mu = m.into();
        }
        if let Some(f) = self.frame_ms {
            cfg.stft.frame_ms = f;
        }
        if let Some(h) = self.hop_ms {
            cfg.stft.hop_ms = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect {
            input,
            pipeline,
            json_out,
        } => {
            let cfg = pipeline.resolve()?;
            let onsets = run_detect(&input, &cfg)?;
            print!("{}", onsets.to_text());
            if let Some(path) = json_out {
                let doc = json!({ "input": input, "onsets": onsets, "config": cfg });
                write_out(&path, &to_json(&doc)?)?;
            }
        }
        Command::Evaluate {
            manifest,
            pipeline,
            tolerance_s,
            json_out,
            csv_out,
        } => {
            let cfg = pipeline.resolve()?;
            let report = run_evaluate(&manifest, &cfg, tolerance_s)?;
            log::info!(
                "scored {} files, {} errors",
                report.files.len(),
                report.errors.len()
            );
            let text = to_json(&report)?;
            match json_out {
                Some(path) => write_out(&path, &text)?,
                None => print!("{text}"),
            }
            if let Some(path) = csv_out {
                report.write_csv(path)?;
            }
        }
        Command::Sweep {
            manifest,
            pipeline,
            grid,
            tolerance_s,
            json_out,
            csv_out,
        } => {
            let cfg = pipeline.resolve()?;
            let grid: SweepGrid = match grid {
                Some(path) => read_json(&path)?,
                None => SweepGrid::default(),
            };
            let result = run_sweep(&manifest, &cfg, &grid, tolerance_s)?;
            log::info!("evaluated {} grid points", result.table.len());
            let doc = json!({ "best": result.best, "errors": result.errors });
            let text = to_json(&doc)?;
            match json_out {
                Some(path) => write_out(&path, &text)?,
                None => print!("{text}"),
            }
            if let Some(path) = csv_out {
                result.write_csv(path)?;
            }
        }
        Command::Bench {
            input,
            pipeline,
            repeats,
            warmup,
            json_out,
        } => {
            let cfg = pipeline.resolve()?;
            let audio = load_audio(&input)?;
            let report = time_pipeline(&audio, &cfg, repeats, warmup)?;
            let doc = json!({
                "machine": {
                    "os": std::env::consts::OS,
                    "arch": std::env::consts::ARCH,
                    "logical_cpus": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
                },
                "file": input,
                "duration_s": audio.duration_seconds(),
                "pipeline": cfg,
                "stages": report.stages,
            });
            let text = to_json(&doc)?;
            match json_out {
                Some(path) => write_out(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::ConvertAnnotations {
            input,
            mapping,
            output,
        } => {
            let mapping = AnnotationMapping::load(&mapping)?;
            let onsets = convert_annotation_file(&input, &mapping)?;
            match output {
                Some(path) => onsets.write_text(path)?,
                None => print!("{}", onsets.to_text()),
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ONSETLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("ONSETLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn exit_code(err: &Error) -> u8 {
    let inner = match err {
        Error::InFile { source, .. } => source.as_ref(),
        e => e,
    };
    match inner {
        Error::InvalidConfig(_) | Error::EmptyGrid | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
